//! Reading and replaying journals and transcripts.
//!
//! A transcript is a journal written by hand: same event schema, derived
//! fields optional. Both parse from a JSON array or from JSON lines.

use thiserror::Error;

use crate::session::events::JournalEvent;
use crate::session::{Session, SessionError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transcript is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        source: serde_json::Error,
    },
    #[error("transcript has no session-created command")]
    Empty,
    #[error("event {seq}: {source}")]
    Event { seq: u64, source: SessionError },
}

impl ReplayError {
    /// Sequence number of the offending event, when one is to blame.
    pub fn seq(&self) -> Option<u64> {
        match self {
            ReplayError::Event { seq, .. } => Some(*seq),
            _ => None,
        }
    }
}

/// Parses a JSON array of events or one event per line.
pub fn parse_events(text: &str) -> Result<Vec<JournalEvent>, ReplayError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return Ok(serde_json::from_str(trimmed)?);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ReplayError::Line { line: i + 1, source })
        })
        .collect()
}

/// Serializes events as JSON lines, one per event.
pub fn to_jsonl(events: &[JournalEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Rebuilds a session by applying every event in order.
pub fn replay(events: &[JournalEvent]) -> Result<Session, ReplayError> {
    let (first, rest) = events.split_first().ok_or(ReplayError::Empty)?;
    let mut session =
        Session::create(first).map_err(|source| ReplayError::Event { seq: first.seq, source })?;
    for e in rest {
        session
            .apply(e)
            .map_err(|source| ReplayError::Event { seq: e.seq, source })?;
    }
    Ok(session)
}

pub fn replay_str(text: &str) -> Result<Session, ReplayError> {
    replay(&parse_events(text)?)
}
