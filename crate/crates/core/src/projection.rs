//! Role-filtered views of journal events and session state.
//!
//! Every outgoing event passes an explicit field allowlist. Ballot tokens
//! never leave the process and practitioners only learn that a practice
//! table changed, not what it says.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::session::events::{EventKind, JournalEvent};
use crate::session::{Phase, SessionSnapshot};
use crate::voting::{BallotToken, RoundId, Viewer};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedEvent {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub kind: &'static str,
    pub payload: Value,
}

/// Fields a viewer may see, per event kind. `None` means every field.
fn allowlist(kind: &EventKind, viewer: Viewer) -> Option<&'static [&'static str]> {
    match (kind, viewer) {
        (EventKind::RoundOpened { .. }, _) => {
            Some(&["round_id", "story_id", "round_kind", "incomplete_override"])
        }
        (EventKind::BallotCast { .. }, _) => Some(&["round_id"]),
        (EventKind::PracticeTableUpdated { .. }, Viewer::Practitioner) => Some(&["story_id"]),
        (EventKind::FindingCorrected { .. }, Viewer::Practitioner) => Some(&["story_id"]),
        (EventKind::ExplanationRecorded { .. }, Viewer::Practitioner) => {
            Some(&["story_id", "position"])
        }
        _ => None,
    }
}

/// Stateful projector: feed it every event in order. It tracks ballot
/// counts so `ballot_cast` can be published as a bare progress count.
#[derive(Debug, Default, Clone)]
pub struct Projector {
    cast: BTreeMap<RoundId, BTreeSet<BallotToken>>,
    expected: BTreeMap<RoundId, usize>,
}

impl Projector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn project(&mut self, event: &JournalEvent, viewer: Viewer) -> ProjectedEvent {
        let mut extra = Map::new();
        match &event.kind {
            EventKind::RoundOpened {
                round_id,
                ballot_tokens,
                ..
            } => {
                self.expected.insert(*round_id, ballot_tokens.len());
                extra.insert("expected".into(), ballot_tokens.len().into());
            }
            EventKind::BallotCast {
                round_id,
                ballot_token,
                ..
            } => {
                let tokens = self.cast.entry(*round_id).or_default();
                tokens.insert(ballot_token.clone());
                extra.insert("cast_count".into(), tokens.len().into());
                if let Some(n) = self.expected.get(round_id) {
                    extra.insert("expected".into(), (*n).into());
                }
            }
            _ => {}
        }
        let full = serde_json::to_value(&event.kind).expect("events serialize");
        let mut payload = match full.get("payload") {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        };
        if let Some(fields) = allowlist(&event.kind, viewer) {
            payload.retain(|k, _| fields.contains(&k.as_str()));
        }
        payload.extend(extra);
        ProjectedEvent {
            seq: event.seq,
            ts: event.ts,
            kind: event.kind.name(),
            payload: Value::Object(payload),
        }
    }
}

/// Projects a whole journal, returning the events with `seq > after`.
pub fn project_from(events: &[JournalEvent], viewer: Viewer, after: u64) -> Vec<ProjectedEvent> {
    let mut projector = Projector::new();
    events
        .iter()
        .map(|e| projector.project(e, viewer))
        .filter(|p| p.seq > after)
        .collect()
}

/// State as a viewer may see it. Practitioners see practice tables only
/// for the story under validation, and never the assessor's notes.
pub fn project_snapshot(snapshot: &SessionSnapshot, viewer: Viewer) -> Value {
    let mut value = serde_json::to_value(snapshot).expect("snapshot serializes");
    if viewer == Viewer::Assessor {
        return value;
    }
    let validating = (snapshot.phase == Phase::FindingValidation)
        .then_some(snapshot.story_id.as_deref())
        .flatten();
    if let Some(Value::Array(stories)) = value.get_mut("stories") {
        for story in stories {
            let Value::Object(m) = story else { continue };
            let visible = validating.is_some() && m.get("story_id").and_then(Value::as_str) == validating;
            m.remove("explanations");
            if !visible {
                m.remove("practice_table");
                m.remove("corrections");
            }
        }
    }
    value
}
