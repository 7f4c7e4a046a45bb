//! Routes, shared state and request handling.
//!
//! Every command for a session runs under that session's mutex: plan,
//! persist, commit and broadcast happen in one critical section, so the
//! journal order is the broadcast order.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::broadcast;

use ngi_core::catalog::{load_catalog, render_story, CatalogError};
use ngi_core::journal::to_jsonl;
use ngi_core::projection::{project_snapshot, ProjectedEvent, Projector};
use ngi_core::report::{render_all, ReportError};
use ngi_core::session::events::{EventKind, JournalEvent};
use ngi_core::session::live::{
    Actor, Clock, Command, CommandError, LiveOptions, LiveSession, ParticipantSpec, Role, Roster,
    SystemClock,
};
use ngi_core::session::{Phase, SessionConfig};

use crate::error::ApiError;
use crate::store::{credential_digest, SessionRecord, Store, StoreError, StoredParticipant, StoredSession};

/// Broadcast buffer per session. A subscriber that falls further behind is
/// disconnected and resumes from its last seen sequence number.
const STREAM_BUFFER: usize = 1024;

struct Hosted {
    live: Mutex<LiveSession>,
    /// Credential hash to participant id.
    credentials: HashMap<String, String>,
    events: broadcast::Sender<JournalEvent>,
}

struct Inner {
    sessions: RwLock<HashMap<String, Arc<Hosted>>>,
    store: Arc<dyn Store>,
    defaults: SessionConfig,
    clock: Arc<dyn Clock>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn sha256_hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0u8]);
        }
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn new_credential() -> String {
    let mut bytes = [0u8; 32];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn roster_of(record: &SessionRecord) -> Vec<ParticipantSpec> {
    record
        .participants
        .iter()
        .map(|p| ParticipantSpec {
            participant_id: p.participant_id.clone(),
            role: p.role,
        })
        .collect()
}

impl AppState {
    /// Opens the store and recovers every session in it. Fails rather than
    /// serving with a session silently missing.
    pub fn open(store: Arc<dyn Store>, defaults: SessionConfig) -> Result<AppState, StoreError> {
        Self::open_with_clock(store, defaults, Arc::new(SystemClock))
    }

    pub fn open_with_clock(
        store: Arc<dyn Store>,
        defaults: SessionConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<AppState, StoreError> {
        let mut sessions = HashMap::new();
        for StoredSession {
            record,
            events,
            progress,
        } in store.load_all()?
        {
            let corrupt = |source| StoreError::Corrupt {
                session_id: record.session_id.clone(),
                source,
            };
            let roster = Roster::from_participants(&roster_of(&record)).map_err(|e| {
                corrupt(ngi_core::journal::ReplayError::Event { seq: 1, source: e })
            })?;
            let options = LiveOptions {
                clock: clock.clone(),
                ..LiveOptions::default()
            };
            let mut live = LiveSession::recover(events, roster, options).map_err(corrupt)?;
            if let Some(p) = progress {
                if !live.restore_ballot_progress(&p) {
                    tracing::warn!(
                        session_id = %record.session_id,
                        "saved ballot progress does not match the journal; per-seat flags unknown"
                    );
                }
            }
            tracing::info!(
                session_id = %record.session_id,
                last_seq = live.session().last_seq(),
                "recovered session"
            );
            sessions.insert(record.session_id.clone(), Arc::new(Hosted::new(live, &record)));
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                sessions: RwLock::new(sessions),
                store,
                defaults,
                clock,
            }),
        })
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("sessions lock").len()
    }

    fn hosted(&self, id: &str) -> Result<Arc<Hosted>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

impl Hosted {
    fn new(live: LiveSession, record: &SessionRecord) -> Hosted {
        Hosted {
            live: Mutex::new(live),
            credentials: record
                .participants
                .iter()
                .map(|p| (p.credential_sha256.clone(), p.participant_id.clone()))
                .collect(),
            events: broadcast::channel(STREAM_BUFFER).0,
        }
    }

    fn authenticate(&self, credential: Option<&str>) -> Result<(String, Actor), ApiError> {
        let credential = credential.ok_or_else(ApiError::missing_credential)?;
        let pid = self
            .credentials
            .get(&credential_digest(credential))
            .ok_or_else(ApiError::invalid_credential)?;
        let actor = self
            .live
            .lock()
            .expect("session lock")
            .actor(pid)
            .ok_or_else(ApiError::invalid_credential)?;
        Ok((pid.clone(), actor))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/commands", post(command))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/export/{artifact}", get(export))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": state.session_count() }))
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_request", e.to_string()))
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    catalog: Value,
    roster: Vec<ParticipantSpec>,
    /// Partial config; missing fields take the server defaults.
    #[serde(default)]
    config: Option<Value>,
}

#[derive(Debug, Serialize)]
struct IssuedCredential {
    participant_id: String,
    role: Role,
    credential: String,
}

fn merged_config(defaults: &SessionConfig, overrides: Option<Value>) -> Result<SessionConfig, ApiError> {
    let Some(overrides) = overrides else {
        return Ok(defaults.clone());
    };
    let Value::Object(fields) = overrides else {
        return Err(ApiError::bad_request("invalid_config", "config must be an object"));
    };
    let mut base = serde_json::to_value(defaults).expect("config serializes");
    base.as_object_mut().expect("config is an object").extend(fields);
    serde_json::from_value(base).map_err(|e| ApiError::bad_request("invalid_config", e.to_string()))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateRequest = parse_body(&body)?;
    let catalog = match load_catalog(&request.catalog.to_string()) {
        Ok(c) => c,
        Err(CatalogError::Invalid(violations)) => return Err(ApiError::invalid_catalog(violations)),
        Err(e) => return Err(ApiError::bad_request("invalid_catalog", e.to_string())),
    };
    let config = merged_config(&state.inner.defaults, request.config)?;
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let options = LiveOptions {
        clock: state.inner.clock.clone(),
        ..LiveOptions::default()
    };
    let (live, opening) = LiveSession::create(&session_id, catalog, &request.roster, config, options)
        .map_err(|e| ApiError::bad_request("invalid_roster", e.to_string()))?;

    let issued: Vec<IssuedCredential> = request
        .roster
        .iter()
        .map(|p| IssuedCredential {
            participant_id: p.participant_id.clone(),
            role: p.role,
            credential: new_credential(),
        })
        .collect();
    let record = SessionRecord {
        session_id: session_id.clone(),
        participants: issued
            .iter()
            .map(|c| StoredParticipant {
                participant_id: c.participant_id.clone(),
                role: c.role,
                credential_sha256: credential_digest(&c.credential),
            })
            .collect(),
    };
    state
        .inner
        .store
        .create(&record, &opening)
        .map_err(ApiError::storage)?;
    let warnings = live.session().warnings().to_vec();
    let hosted = Arc::new(Hosted::new(live, &record));
    state
        .inner
        .sessions
        .write()
        .expect("sessions lock")
        .insert(session_id.clone(), hosted);
    tracing::info!(%session_id, "session created");
    let body = json!({
        "session_id": session_id,
        "credentials": issued,
        "warnings": warnings,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Debug, Deserialize)]
struct Envelope {
    credential: String,
    #[serde(default)]
    idempotency_key: Option<String>,
    command: Value,
}

async fn command(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let envelope: Envelope = parse_body(&body)?;
    let hosted = state.hosted(&id)?;
    let (pid, _) = hosted.authenticate(Some(&envelope.credential))?;
    let command: Command = serde_json::from_value(envelope.command)
        .map_err(|e| ApiError::bad_request("invalid_command", e.to_string()))?;
    // Keys are scoped to the sender and opaque in the journal.
    let key = envelope
        .idempotency_key
        .filter(|k| !k.is_empty())
        .map(|k| sha256_hex(&[&pid, &k])[..32].to_string());

    let mut live = hosted.live.lock().expect("session lock");
    let store = &state.inner.store;
    let outcome = live
        .execute_with(&pid, command, key.as_deref(), |events| {
            store.append(&id, events).map_err(|e| e.to_string())
        })
        .map_err(ApiError::command)?;
    let voting_changed = outcome.events.iter().any(|e| {
        matches!(
            e.kind,
            EventKind::RoundOpened { .. } | EventKind::BallotCast { .. } | EventKind::RoundRevealed { .. }
        )
    });
    if voting_changed {
        // Written after the journal: a crash in between leaves a file whose
        // cast count disagrees with the journal, and recovery ignores it.
        if let Err(e) = store.save_progress(&id, live.ballot_progress().as_ref()) {
            tracing::error!(error = %e, session_id = %id, "could not save ballot progress");
        }
    }
    for e in &outcome.events {
        // No receivers is fine: nobody is streaming.
        let _ = hosted.events.send(e.clone());
    }
    drop(live);
    Ok(Json(json!({ "reply": outcome.reply })))
}

#[derive(Debug, Default, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    credential: Option<String>,
    #[serde(default)]
    from: Option<u64>,
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::to_string)
}

fn envelope_event(p: &ProjectedEvent) -> Event {
    Event::default()
        .id(p.seq.to_string())
        .event(p.kind)
        .json_data(p)
        .expect("projected events serialize")
}

struct Tail {
    rx: broadcast::Receiver<JournalEvent>,
    projector: Projector,
    viewer: ngi_core::voting::Viewer,
    last: u64,
    done: bool,
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let hosted = state.hosted(&id)?;
    let credential = q.credential.or_else(|| bearer(&headers));
    let (_, actor) = hosted.authenticate(credential.as_deref())?;
    let viewer = actor.viewer();
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|seq| seq + 1);
    let from = q.from.or(resume).unwrap_or(1);

    // Subscribe before reading the backlog so nothing falls in between.
    let (rx, backlog) = {
        let live = hosted.live.lock().expect("session lock");
        (hosted.events.subscribe(), live.journal().to_vec())
    };
    let mut projector = Projector::new();
    let mut first = Vec::new();
    let mut closed = false;
    for e in &backlog {
        let p = projector.project(e, viewer);
        closed |= matches!(e.kind, EventKind::SessionClosed { .. });
        if p.seq >= from {
            first.push(Ok(envelope_event(&p)));
        }
    }
    let tail = Tail {
        rx,
        projector,
        viewer,
        last: backlog.last().map_or(0, |e| e.seq),
        done: closed,
    };
    let live_events = stream::unfold(tail, move |mut t| async move {
        if t.done {
            return None;
        }
        loop {
            match t.rx.recv().await {
                Ok(e) if e.seq <= t.last => continue,
                Ok(e) => {
                    t.last = e.seq;
                    t.done = matches!(e.kind, EventKind::SessionClosed { .. });
                    let p = t.projector.project(&e, t.viewer);
                    if p.seq < from {
                        continue;
                    }
                    return Some((Ok(envelope_event(&p)), t));
                }
                // Lagged or shut down: end the stream; the client resumes
                // with Last-Event-ID.
                Err(_) => return None,
            }
        }
    });
    Ok(Sse::new(stream::iter(first).chain(live_events))
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn session_state(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let hosted = state.hosted(&id)?;
    let credential = q.credential.or_else(|| bearer(&headers));
    let (pid, actor) = hosted.authenticate(credential.as_deref())?;
    let live = hosted.live.lock().expect("session lock");
    let seat = match actor {
        Actor::Practitioner(seat) => Some(seat),
        Actor::Assessor => None,
    };
    let session = live.session();
    Ok(Json(json!({
        "you": { "participant_id": pid, "role": actor.role(), "seat": seat },
        "story_text": session
            .phase()
            .has_story()
            .then(|| render_story(session.current_story())),
        "round_status": live.round_status(actor),
        "snapshot": project_snapshot(&session.snapshot(), actor.viewer()),
    })))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    credential: Option<String>,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    draft: Option<bool>,
}

fn document(body: String, content_type: &'static str) -> Response {
    let mut response = body.into_response();
    response
        .headers_mut()
        .insert(CONTENT_TYPE, HeaderValue::from_static(content_type));
    response
}

async fn export(
    State(state): State<AppState>,
    Path((id, artifact)): Path<(String, String)>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let hosted = state.hosted(&id)?;
    let credential = q.credential.or_else(|| bearer(&headers));
    let (_, actor) = hosted.authenticate(credential.as_deref())?;
    if actor != Actor::Assessor {
        return Err(ApiError::unauthorized("exports are for the assessor"));
    }
    // Snapshot the journal, then render without holding the lock.
    let (events, session) = {
        let live = hosted.live.lock().expect("session lock");
        (live.journal().to_vec(), live.session().clone())
    };
    let format = q.format.as_deref().unwrap_or("json");
    if artifact == "journal" {
        if format != "jsonl" && format != "json" {
            return Err(ApiError::bad_request("invalid_format", "journal exports as jsonl"));
        }
        if session.open_round().is_some() {
            return Err(ApiError::conflict(
                "round_open",
                "the journal is exported only while no vote is open",
            ));
        }
        return Ok(document(to_jsonl(&events), "application/x-ndjson; charset=utf-8"));
    }
    if !["findings", "vote_table", "practice_tables"].contains(&artifact.as_str()) {
        return Err(ApiError::not_found(format!("no artifact {artifact}")));
    }
    let (ext, content_type) = match format {
        "json" => ("json", "application/json; charset=utf-8"),
        "md" | "markdown" => ("md", "text/markdown; charset=utf-8"),
        other => {
            return Err(ApiError::bad_request(
                "invalid_format",
                format!("unknown format {other}; use json or md"),
            ))
        }
    };
    let draft = q.draft.unwrap_or(session.phase() != Phase::Closed);
    let mut rendered = render_all(&session, draft).map_err(|e| match e {
        ReportError::Replay(_) => ApiError::internal(e.to_string()),
        _ => ApiError::conflict("report_unavailable", e.to_string()),
    })?;
    let body = rendered
        .remove(format!("{artifact}.{ext}").as_str())
        .expect("every artifact renders in both formats");
    Ok(document(body, content_type))
}

impl ApiError {
    fn command(e: CommandError) -> ApiError {
        let code = e.code();
        let message = e.to_string();
        match e {
            CommandError::UnknownParticipant(_) => ApiError::invalid_credential(),
            CommandError::Forbidden { .. } => ApiError::new(StatusCode::FORBIDDEN, code, message),
            CommandError::Session(_) => ApiError::new(StatusCode::CONFLICT, code, message),
            CommandError::Persist(_) => {
                tracing::error!(%message, "journal append failed");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, code, message)
            }
        }
    }
}
