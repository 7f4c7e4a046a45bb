//! Session persistence: one append-only journal per session plus the
//! roster with hashed credentials.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ngi_core::journal::{parse_events, ReplayError};
use ngi_core::session::events::JournalEvent;
use ngi_core::session::live::Role;
use ngi_core::voting::BallotProgress;
use sha2::Digest;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredParticipant {
    pub participant_id: String,
    pub role: Role,
    /// Hex SHA-256 of the credential; the credential itself is never stored.
    pub credential_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participants: Vec<StoredParticipant>,
}

/// Digest under which a participant credential is stored.
pub fn credential_digest(credential: &str) -> String {
    hex::encode(sha2::Sha256::digest(credential.as_bytes()))
}

/// Everything stored for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub record: SessionRecord,
    pub events: Vec<JournalEvent>,
    /// Seats that have cast in the open round. Advisory: the journal wins.
    pub progress: Option<BallotProgress>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} already exists")]
    Exists(String),
    #[error("session {0} is not stored")]
    Missing(String),
    #[error("storage i/o failed at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("stored session {session_id} is unreadable: {source}")]
    Corrupt {
        session_id: String,
        source: ReplayError,
    },
    #[error("stored roster of {session_id} is unreadable: {source}")]
    Roster {
        session_id: String,
        source: serde_json::Error,
    },
}

/// Durable home of sessions. `append` must not return before the events
/// are durable: a command is acknowledged only after it succeeds.
pub trait Store: Send + Sync + 'static {
    fn create(&self, record: &SessionRecord, events: &[JournalEvent]) -> Result<(), StoreError>;
    fn append(&self, session_id: &str, events: &[JournalEvent]) -> Result<(), StoreError>;
    /// Replaces the saved ballot progress; `None` removes it.
    fn save_progress(
        &self,
        session_id: &str,
        progress: Option<&BallotProgress>,
    ) -> Result<(), StoreError>;
    fn load_all(&self) -> Result<Vec<StoredSession>, StoreError>;
}

/// Keeps everything in memory; for tests and throwaway servers.
#[derive(Debug, Default)]
pub struct MemoryStore {
    sessions: Mutex<BTreeMap<String, StoredSession>>,
}

impl Store for MemoryStore {
    fn create(&self, record: &SessionRecord, events: &[JournalEvent]) -> Result<(), StoreError> {
        let mut map = self.sessions.lock().expect("store lock");
        if map.contains_key(&record.session_id) {
            return Err(StoreError::Exists(record.session_id.clone()));
        }
        map.insert(
            record.session_id.clone(),
            StoredSession {
                record: record.clone(),
                events: events.to_vec(),
                progress: None,
            },
        );
        Ok(())
    }

    fn append(&self, session_id: &str, events: &[JournalEvent]) -> Result<(), StoreError> {
        let mut map = self.sessions.lock().expect("store lock");
        let stored = map
            .get_mut(session_id)
            .ok_or_else(|| StoreError::Missing(session_id.to_string()))?;
        stored.events.extend_from_slice(events);
        Ok(())
    }

    fn save_progress(
        &self,
        session_id: &str,
        progress: Option<&BallotProgress>,
    ) -> Result<(), StoreError> {
        let mut map = self.sessions.lock().expect("store lock");
        let stored = map
            .get_mut(session_id)
            .ok_or_else(|| StoreError::Missing(session_id.to_string()))?;
        stored.progress = progress.cloned();
        Ok(())
    }

    fn load_all(&self) -> Result<Vec<StoredSession>, StoreError> {
        Ok(self.sessions.lock().expect("store lock").values().cloned().collect())
    }
}

const JOURNAL: &str = "journal.jsonl";
const ROSTER: &str = "roster.json";
const PROGRESS: &str = "ballot_progress.json";

/// `<root>/<session_id>/` holds `journal.jsonl`, `roster.json` and, while
/// a vote is open, `ballot_progress.json`.
#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl FileStore {
    /// Creates the root directory if needed and checks it is writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<FileStore, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let probe = root.join(".write-probe");
        File::create(&probe).map_err(io_err(&probe))?;
        fs::remove_file(&probe).map_err(io_err(&probe))?;
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    /// Write-to-temp, fsync, rename: readers see the old or the new file.
    fn replace_file(path: &Path, body: &str) -> Result<(), StoreError> {
        let tmp = path.with_extension("tmp");
        let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(body.as_bytes()).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    fn write_lines(path: &Path, events: &[JournalEvent], create: bool) -> Result<(), StoreError> {
        let mut file = OpenOptions::new()
            .append(true)
            .create_new(create)
            .open(path)
            .map_err(io_err(path))?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e).expect("events serialize"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err(path))?;
        file.sync_data().map_err(io_err(path))
    }
}

/// Parses a journal file. A final line without its newline is a write
/// torn by a crash; it was never acknowledged, so it is dropped.
fn read_journal(session_id: &str, text: &str) -> Result<Vec<JournalEvent>, StoreError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    parse_events(complete).map_err(|source| StoreError::Corrupt {
        session_id: session_id.to_string(),
        source,
    })
}

impl Store for FileStore {
    fn create(&self, record: &SessionRecord, events: &[JournalEvent]) -> Result<(), StoreError> {
        let dir = self.dir(&record.session_id);
        match fs::create_dir(&dir) {
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(StoreError::Exists(record.session_id.clone()))
            }
            r => r.map_err(io_err(&dir))?,
        }
        Self::replace_file(&dir.join(ROSTER), &ngi_core::report::to_json(record))?;
        Self::write_lines(&dir.join(JOURNAL), events, true)
    }

    fn append(&self, session_id: &str, events: &[JournalEvent]) -> Result<(), StoreError> {
        let path = self.dir(session_id).join(JOURNAL);
        if !path.exists() {
            return Err(StoreError::Missing(session_id.to_string()));
        }
        Self::write_lines(&path, events, false)
    }

    fn save_progress(
        &self,
        session_id: &str,
        progress: Option<&BallotProgress>,
    ) -> Result<(), StoreError> {
        let dir = self.dir(session_id);
        if !dir.is_dir() {
            return Err(StoreError::Missing(session_id.to_string()));
        }
        let path = dir.join(PROGRESS);
        match progress {
            Some(p) => Self::replace_file(&path, &ngi_core::report::to_json(p)),
            None => match fs::remove_file(&path) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(&path)(e)),
                _ => Ok(()),
            },
        }
    }

    fn load_all(&self) -> Result<Vec<StoredSession>, StoreError> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.root).map_err(io_err(&self.root))?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join(ROSTER).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let roster_path = dir.join(ROSTER);
            let text = fs::read_to_string(&roster_path).map_err(io_err(&roster_path))?;
            let session_id = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let record: SessionRecord =
                serde_json::from_str(&text).map_err(|source| StoreError::Roster {
                    session_id: session_id.clone(),
                    source,
                })?;
            let journal_path = dir.join(JOURNAL);
            let text = fs::read_to_string(&journal_path).map_err(io_err(&journal_path))?;
            let events = read_journal(&session_id, &text)?;
            let kept = text.rfind('\n').map_or(0, |i| i + 1);
            if kept < text.len() {
                tracing::warn!(session_id, "dropping a torn journal tail");
                let file = OpenOptions::new()
                    .write(true)
                    .open(&journal_path)
                    .map_err(io_err(&journal_path))?;
                file.set_len(kept as u64).map_err(io_err(&journal_path))?;
                file.sync_data().map_err(io_err(&journal_path))?;
            }
            // Unreadable progress only costs per-seat flags; the journal is intact.
            let progress = fs::read_to_string(dir.join(PROGRESS))
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok());
            out.push(StoredSession {
                record,
                events,
                progress,
            });
        }
        Ok(out)
    }
}
