//! Live sessions: participant commands in, journal events out.
//!
//! A command is planned into events, the events are applied to a copy of the
//! state, handed to the caller's sink for persistence and only then
//! committed. Either every event of a command lands or none does.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::journal::ReplayError;
use crate::rating::{ImplementationLevel, PracticeTable, SkipDisposition};
use crate::session::events::{
    EventKind, JournalEvent, PresenterPolicyUsed, SessionCreated, ValidationStatus,
};
use crate::session::parking::{ParkingStatus, ParkingTag};
use crate::session::{
    Guard, Phase, PresenterPolicy, Session, SessionConfig, SessionError, RECOMMENDED_PRACTITIONERS,
};
use crate::voting::{
    BallotBox, BallotProgress, BallotToken, RoundKind, RoundState, RoundStatus, SeatProgress, VoteCard, Viewer,
};
use crate::Seat;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: every reading advances by a fixed step.
#[derive(Debug)]
pub struct SteppingClock {
    start: DateTime<Utc>,
    step: Duration,
    ticks: AtomicI64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        SteppingClock {
            start,
            step,
            ticks: AtomicI64::new(0),
        }
    }

    /// 2024-01-01T09:00:00Z, one second per reading.
    pub fn fixed() -> Self {
        Self::new(
            Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0).unwrap(),
            Duration::seconds(1),
        )
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * n as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Assessor,
    Practitioner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantSpec {
    pub participant_id: String,
    pub role: Role,
}

/// Participant identities. Kept out of the journal; seats index
/// `practitioners`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    pub assessor: String,
    pub practitioners: Vec<String>,
}

impl Roster {
    pub fn from_participants(participants: &[ParticipantSpec]) -> Result<Roster, SessionError> {
        let mut assessors = participants.iter().filter(|p| p.role == Role::Assessor);
        let assessor = assessors.next().ok_or_else(|| {
            SessionError::InvalidSession("roster needs exactly one assessor".into())
        })?;
        if assessors.next().is_some() {
            return Err(SessionError::InvalidSession(
                "roster needs exactly one assessor".into(),
            ));
        }
        let practitioners: Vec<String> = participants
            .iter()
            .filter(|p| p.role == Role::Practitioner)
            .map(|p| p.participant_id.clone())
            .collect();
        if practitioners.is_empty() {
            return Err(SessionError::InvalidSession(
                "roster needs at least one practitioner".into(),
            ));
        }
        let mut ids: Vec<&str> = participants.iter().map(|p| p.participant_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) || ids.iter().any(|id| id.is_empty()) {
            return Err(SessionError::InvalidSession(
                "participant ids must be unique and non-empty".into(),
            ));
        }
        Ok(Roster {
            assessor: assessor.participant_id.clone(),
            practitioners,
        })
    }

    pub fn actor(&self, participant_id: &str) -> Option<Actor> {
        if participant_id == self.assessor {
            return Some(Actor::Assessor);
        }
        self.seat_of(participant_id).map(Actor::Practitioner)
    }

    pub fn seat_of(&self, participant_id: &str) -> Option<Seat> {
        self.practitioners
            .iter()
            .position(|p| p == participant_id)
            .map(|i| Seat(i as u32))
    }

    pub fn participant(&self, seat: Seat) -> Option<&str> {
        self.practitioners.get(seat.0 as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Assessor,
    Practitioner(Seat),
}

impl Actor {
    pub fn role(self) -> Role {
        match self {
            Actor::Assessor => Role::Assessor,
            Actor::Practitioner(_) => Role::Practitioner,
        }
    }

    pub fn viewer(self) -> Viewer {
        match self {
            Actor::Assessor => Viewer::Assessor,
            Actor::Practitioner(_) => Viewer::Practitioner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionInput {
    pub patch: PracticeTable,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Command {
    StartArea {
        #[serde(default)]
        area_id: Option<String>,
    },
    PresentStory {
        #[serde(default)]
        story_id: Option<String>,
    },
    OpenClarification {},
    OpenPreliminaryVote {},
    RequestBallot {},
    CastVote {
        #[serde(default)]
        ballot_token: Option<BallotToken>,
        card: VoteCard,
    },
    RoundStatus {},
    Reveal {},
    SelectPresenter {
        /// Manual choice of the first speaker.
        #[serde(default)]
        participant_id: Option<String>,
        /// Let a holder of the rarest card start.
        #[serde(default)]
        dissenting: bool,
    },
    RecordExplanation {
        note: String,
    },
    EndExplanations {
        #[serde(default)]
        early_exit: bool,
    },
    UpdatePracticeTable {
        patch: PracticeTable,
    },
    OpenDefinitiveVote {
        #[serde(default)]
        incomplete_override: bool,
    },
    RecordVote {},
    BeginValidation {},
    ResolveJudgment {
        #[serde(default)]
        story_id: Option<String>,
        rating: ImplementationLevel,
        rationale: String,
    },
    ValidateFinding {
        outcome: ValidationStatus,
        #[serde(default)]
        corrections: Vec<CorrectionInput>,
        #[serde(default)]
        dispute_text: Option<String>,
        #[serde(default)]
        misinformation_note: Option<String>,
    },
    SetNoteworthy {
        #[serde(default)]
        story_id: Option<String>,
        noteworthy: bool,
    },
    /// Next story, next area, or the parking lot review, whichever is due.
    Continue {},
    SkipProcessArea {
        reason: String,
        disposition: SkipDisposition,
    },
    AddParkingItem {
        text: String,
        #[serde(default)]
        tag: Option<ParkingTag>,
    },
    AssignParkingItem {
        item_id: u32,
        owner: String,
        #[serde(default)]
        evidence_note: Option<String>,
    },
    OpenParkingClosure {},
    CloseParkingItem {
        item_id: u32,
        status: ParkingStatus,
        #[serde(default)]
        consensus_reached: Option<bool>,
        #[serde(default)]
        evidence_note: Option<String>,
    },
    CloseSession {},
    DeactivateParticipant {
        participant_id: String,
    },
    ReactivateParticipant {
        participant_id: String,
    },
    SetExternalInputs {
        text: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::StartArea { .. } => "start_area",
            Command::PresentStory { .. } => "present_story",
            Command::OpenClarification {} => "open_clarification",
            Command::OpenPreliminaryVote {} => "open_preliminary_vote",
            Command::RequestBallot {} => "request_ballot",
            Command::CastVote { .. } => "cast_vote",
            Command::RoundStatus {} => "round_status",
            Command::Reveal {} => "reveal",
            Command::SelectPresenter { .. } => "select_presenter",
            Command::RecordExplanation { .. } => "record_explanation",
            Command::EndExplanations { .. } => "end_explanations",
            Command::UpdatePracticeTable { .. } => "update_practice_table",
            Command::OpenDefinitiveVote { .. } => "open_definitive_vote",
            Command::RecordVote {} => "record_vote",
            Command::BeginValidation {} => "begin_validation",
            Command::ResolveJudgment { .. } => "resolve_judgment",
            Command::ValidateFinding { .. } => "validate_finding",
            Command::SetNoteworthy { .. } => "set_noteworthy",
            Command::Continue {} => "continue",
            Command::SkipProcessArea { .. } => "skip_process_area",
            Command::AddParkingItem { .. } => "add_parking_item",
            Command::AssignParkingItem { .. } => "assign_parking_item",
            Command::OpenParkingClosure {} => "open_parking_closure",
            Command::CloseParkingItem { .. } => "close_parking_item",
            Command::CloseSession {} => "close_session",
            Command::DeactivateParticipant { .. } => "deactivate_participant",
            Command::ReactivateParticipant { .. } => "reactivate_participant",
            Command::SetExternalInputs { .. } => "set_external_inputs",
        }
    }

    /// Whether practitioners may issue this command at all. Some of these
    /// have further per-seat checks.
    pub fn practitioner_allowed(&self) -> bool {
        matches!(
            self,
            Command::RequestBallot {}
                | Command::CastVote { .. }
                | Command::RoundStatus {}
                | Command::RecordExplanation { .. }
                | Command::AddParkingItem { .. }
        )
    }

    /// Commands only practitioners issue: the assessor does not vote.
    pub fn assessor_allowed(&self) -> bool {
        !matches!(self, Command::RequestBallot {} | Command::CastVote { .. })
    }
}

/// Acknowledgement of a command. Rebuilt identically from the journal after
/// a restart, so retried idempotency keys see the original reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReply {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_seq: Option<u64>,
    pub phase: Phase,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("unknown participant {0}")]
    UnknownParticipant(String),
    #[error("{role:?} may not issue {command}")]
    Forbidden { role: Role, command: &'static str },
    #[error("{0}")]
    Session(#[from] SessionError),
    #[error("journal write failed: {0}")]
    Persist(String),
}

impl CommandError {
    pub fn code(&self) -> String {
        match self {
            CommandError::UnknownParticipant(_) => "unknown_participant".into(),
            CommandError::Forbidden { .. } => "unauthorized".into(),
            CommandError::Session(e) => e.code(),
            CommandError::Persist(_) => "persist_failed".into(),
        }
    }
}

/// Result of a successful command: the reply plus the events it appended.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub reply: CommandReply,
    pub events: Vec<JournalEvent>,
}

pub struct LiveSession {
    session: Session,
    journal: Vec<JournalEvent>,
    roster: Roster,
    ballots: BallotBox,
    /// Rarest-card holders of the last revealed preliminary round, kept
    /// only in memory. `None` when unknown.
    dissenters: Option<Vec<Seat>>,
    replies: HashMap<String, CommandReply>,
    clock: Arc<dyn Clock>,
    rng: Box<dyn RngCore + Send>,
}

impl fmt::Debug for LiveSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveSession")
            .field("session_id", &self.session.id())
            .field("last_seq", &self.session.last_seq())
            .field("phase", &self.session.phase())
            .finish_non_exhaustive()
    }
}

pub struct LiveOptions {
    pub clock: Arc<dyn Clock>,
    pub rng: Box<dyn RngCore + Send>,
}

impl Default for LiveOptions {
    fn default() -> Self {
        LiveOptions {
            clock: Arc::new(SystemClock),
            rng: Box::new(StdRng::from_os_rng()),
        }
    }
}

impl LiveOptions {
    /// Stepping clock and seeded rng, for reproducible runs.
    pub fn deterministic(seed: u64) -> Self {
        LiveOptions {
            clock: Arc::new(SteppingClock::fixed()),
            rng: Box::new(StdRng::seed_from_u64(seed)),
        }
    }
}

impl LiveSession {
    /// Starts a session. The returned events are the opening journal.
    pub fn create(
        session_id: &str,
        catalog: Catalog,
        participants: &[ParticipantSpec],
        config: SessionConfig,
        options: LiveOptions,
    ) -> Result<(LiveSession, Vec<JournalEvent>), SessionError> {
        let roster = Roster::from_participants(participants)?;
        let count = roster.practitioners.len() as u32;
        let ts = options.clock.now();
        let created = JournalEvent {
            seq: 1,
            ts,
            kind: EventKind::SessionCreated(SessionCreated {
                session_id: session_id.to_string(),
                catalog,
                practitioner_count: count,
                inactive_seats: Vec::new(),
                config,
            }),
            idempotency_key: None,
        };
        let mut session = Session::create(&created)?;
        let mut journal = vec![created];
        let (lo, hi) = RECOMMENDED_PRACTITIONERS;
        if session.config().warn_participant_bounds && !(lo..=hi).contains(&count) {
            let warning = JournalEvent {
                seq: 2,
                ts,
                kind: EventKind::RosterWarning {
                    practitioner_count: count,
                    recommended_min: lo,
                    recommended_max: hi,
                },
                idempotency_key: None,
            };
            session.apply(&warning)?;
            journal.push(warning);
        }
        let events = journal.clone();
        Ok((
            LiveSession {
                session,
                journal,
                roster,
                ballots: BallotBox::default(),
                dissenters: None,
                replies: HashMap::new(),
                clock: options.clock,
                rng: options.rng,
            },
            events,
        ))
    }

    /// Rebuilds a live session from its journal after a restart. Ballot
    /// bindings are not recoverable; seats draw unused tokens on request.
    pub fn recover(
        events: Vec<JournalEvent>,
        roster: Roster,
        options: LiveOptions,
    ) -> Result<LiveSession, ReplayError> {
        let (first, rest) = events.split_first().ok_or(ReplayError::Empty)?;
        let mut session =
            Session::create(first).map_err(|source| ReplayError::Event { seq: first.seq, source })?;
        if session.practitioner_count() as usize != roster.practitioners.len() {
            return Err(ReplayError::Event {
                seq: first.seq,
                source: SessionError::Corrupt("roster size differs from the journal".into()),
            });
        }
        let mut replies = HashMap::new();
        let mut batch_start: Option<usize> = None;
        for (i, e) in rest.iter().enumerate() {
            session
                .apply(e)
                .map_err(|source| ReplayError::Event { seq: e.seq, source })?;
            let Some(key) = &e.idempotency_key else {
                batch_start = None;
                continue;
            };
            let start = match batch_start {
                Some(s) if rest[s].idempotency_key.as_ref() == Some(key) => s,
                _ => i,
            };
            batch_start = Some(start);
            let batch_ends = rest
                .get(i + 1)
                .is_none_or(|n| n.idempotency_key.as_ref() != Some(key));
            if batch_ends {
                let batch = &rest[start..=i];
                replies.insert(key.clone(), reply_for(batch, &session));
                batch_start = None;
            }
        }
        let mut live = LiveSession {
            session,
            journal: events,
            roster,
            ballots: BallotBox::default(),
            dissenters: None,
            replies,
            clock: options.clock,
            rng: options.rng,
        };
        // Nobody has cast yet, so nothing about the round is unknown.
        if let Some(round) = live.session.open_round().filter(|r| r.cast_count() == 0) {
            let empty = BallotProgress {
                round_id: round.id,
                cast: Default::default(),
            };
            live.ballots.restore(&empty);
        }
        Ok(live)
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn journal(&self) -> &[JournalEvent] {
        &self.journal
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn actor(&self, participant_id: &str) -> Option<Actor> {
        self.roster.actor(participant_id)
    }

    pub fn execute(
        &mut self,
        participant_id: &str,
        command: Command,
        idempotency_key: Option<&str>,
    ) -> Result<Outcome, CommandError> {
        self.execute_with(participant_id, command, idempotency_key, |_| Ok(()))
    }

    /// Runs a command; `persist` sees the new events before they are
    /// committed and can veto them by returning an error.
    pub fn execute_with<F>(
        &mut self,
        participant_id: &str,
        command: Command,
        idempotency_key: Option<&str>,
        persist: F,
    ) -> Result<Outcome, CommandError>
    where
        F: FnOnce(&[JournalEvent]) -> Result<(), String>,
    {
        let actor = self
            .roster
            .actor(participant_id)
            .ok_or_else(|| CommandError::UnknownParticipant(participant_id.to_string()))?;
        if let Some(reply) = idempotency_key.and_then(|k| self.replies.get(k)) {
            return Ok(Outcome {
                reply: reply.clone(),
                events: Vec::new(),
            });
        }
        let allowed = match actor {
            Actor::Assessor => command.assessor_allowed(),
            Actor::Practitioner(_) => command.practitioner_allowed(),
        };
        if !allowed {
            return Err(CommandError::Forbidden {
                role: actor.role(),
                command: command.name(),
            });
        }
        let name = command.name();
        let planned = match self.plan(actor, &command) {
            Ok(Plan::Events(kinds)) => kinds,
            Ok(Plan::Reply(detail)) => {
                return Ok(Outcome {
                    reply: CommandReply {
                        first_seq: None,
                        last_seq: None,
                        phase: self.session.phase(),
                        detail,
                    },
                    events: Vec::new(),
                })
            }
            Err(e) => return Err(rename(e, name).into()),
        };
        let dissenters = if planned
            .iter()
            .any(|k| matches!(k, EventKind::RoundRevealed { .. }))
        {
            self.session
                .open_round()
                .filter(|r| r.kind == RoundKind::Preliminary)
                .and_then(|r| self.ballots.minority_holders(r))
        } else {
            self.dissenters.clone()
        };

        let now = self.clock.now().max(self.session.last_ts());
        let mut next = self.session.clone();
        let mut events = Vec::with_capacity(planned.len());
        for kind in planned {
            // A client-chosen key could identify the voter, so casts never carry one.
            let key = match kind {
                EventKind::BallotCast { .. } => None,
                _ => idempotency_key.map(str::to_string),
            };
            let mut event = JournalEvent {
                seq: next.last_seq() + 1,
                ts: now,
                kind,
                idempotency_key: key,
            };
            next.apply(&event).map_err(|e| rename(e, name))?;
            fill_derived(&mut event.kind, &next);
            events.push(event);
        }
        persist(&events).map_err(CommandError::Persist)?;

        self.session = next;
        self.dissenters = dissenters;
        for e in &events {
            match &e.kind {
                EventKind::RoundOpened {
                    round_id,
                    ballot_tokens,
                    ..
                } => {
                    let seats = self.session.active_seats();
                    self.ballots
                        .issue(*round_id, ballot_tokens, &seats, self.rng.as_mut());
                }
                EventKind::RoundRevealed { .. } => self.ballots.discard(),
                EventKind::PresenterSelected { .. } => self.dissenters = None,
                _ => {}
            }
        }
        self.journal.extend(events.iter().cloned());
        let reply = reply_for(&events, &self.session);
        if let Some(key) = idempotency_key {
            self.replies.insert(key.to_string(), reply.clone());
        }
        Ok(Outcome { reply, events })
    }

    /// Which seats have cast in the open round, when known for every seat.
    /// Persist it next to the journal to keep per-seat progress across a
    /// restart; it carries no tokens and no cards.
    pub fn ballot_progress(&self) -> Option<BallotProgress> {
        self.ballots.progress(self.session.open_round()?)
    }

    /// Restores progress saved by [`LiveSession::ballot_progress`]. Refused
    /// unless it matches the open round and its cast count, which also
    /// rejects a file left stale by a crash between the two writes.
    pub fn restore_ballot_progress(&mut self, progress: &BallotProgress) -> bool {
        let Some(round) = self.session.open_round() else {
            return false;
        };
        let fits = round.id == progress.round_id
            && progress.cast.len() as u32 == round.cast_count()
            && progress.cast.iter().all(|s| self.session.is_active(*s));
        if fits {
            self.ballots.restore(progress);
        }
        fits
    }

    /// Voting progress for `actor`. Only the assessor sees per-seat flags.
    pub fn round_status(&self, actor: Actor) -> Option<RoundStatus> {
        let round = self.session.current_round()?;
        let has_cast = (actor == Actor::Assessor && round.state == RoundState::Open).then(|| {
            self.session
                .active_seats()
                .into_iter()
                .map(|seat| SeatProgress {
                    seat,
                    has_cast: self.ballots.has_cast(round, seat),
                })
                .collect()
        });
        Some(RoundStatus {
            round_id: round.id,
            story_id: round.story_id.clone(),
            kind: round.kind,
            state: round.state,
            cast_count: round.cast_count(),
            expected: round.expected(),
            has_cast,
            distribution: round.distribution(),
        })
    }

    fn plan(&mut self, actor: Actor, command: &Command) -> Result<Plan, SessionError> {
        let s = &self.session;
        let story = s.current_story_id().to_string();
        let events = match command {
            Command::StartArea { area_id } => {
                let target = match area_id {
                    Some(id) => id.clone(),
                    None => self.next_area_id(),
                };
                vec![EventKind::AreaStarted { area_id: target }]
            }
            Command::PresentStory { story_id } => {
                let target = match story_id {
                    Some(id) => id.clone(),
                    None => self.next_story_id(),
                };
                vec![EventKind::StoryPresented { story_id: target }]
            }
            Command::OpenClarification {} => vec![EventKind::ClarificationOpened {
                story_id: story,
                timebox_seconds: s.config().clarification_timebox_seconds,
            }],
            Command::OpenPreliminaryVote {} => vec![self.open_round(RoundKind::Preliminary, false)],
            Command::OpenDefinitiveVote {
                incomplete_override,
            } => vec![self.open_round(RoundKind::Definitive, *incomplete_override)],
            Command::RequestBallot {} => {
                let Actor::Practitioner(seat) = actor else {
                    unreachable!("role checked")
                };
                let token = self.ballot_for(seat, None)?;
                let round = self.session.open_round().expect("ballot implies open round");
                return Ok(Plan::Reply(json!({
                    "round_id": round.id,
                    "ballot_token": token,
                })));
            }
            Command::CastVote { ballot_token, card } => {
                let Actor::Practitioner(seat) = actor else {
                    unreachable!("role checked")
                };
                let token = self.ballot_for(seat, ballot_token.as_ref())?;
                let round = self.session.open_round().expect("ballot implies open round");
                vec![EventKind::BallotCast {
                    round_id: round.id,
                    ballot_token: token,
                    card: *card,
                }]
            }
            Command::RoundStatus {} => {
                let status = self.round_status(actor);
                return Ok(Plan::Reply(serde_json::to_value(status).expect("serializable")));
            }
            Command::Reveal {} => {
                let round = s.current_round().ok_or(SessionError::IllegalTransition {
                    phase: s.phase(),
                    command: "reveal".into(),
                })?;
                if round.state == RoundState::Revealed
                    && matches!(
                        s.phase(),
                        Phase::PreliminaryRevealed | Phase::DefinitiveRevealed
                    )
                {
                    return Ok(Plan::Reply(json!({
                        "round_id": round.id,
                        "distribution": round.distribution(),
                    })));
                }
                vec![EventKind::RoundRevealed {
                    round_id: round.id,
                    distribution: round
                        .state
                        .eq(&RoundState::Open)
                        .then(|| s.rounds().tally(round.id).ok())
                        .flatten(),
                }]
            }
            Command::SelectPresenter {
                participant_id,
                dissenting,
            } => {
                let round_id = s
                    .current_round()
                    .map(|r| r.id)
                    .ok_or(SessionError::IllegalTransition {
                        phase: s.phase(),
                        command: "select_presenter".into(),
                    })?;
                let (seat, policy) = match (participant_id, dissenting) {
                    (Some(_), true) => {
                        return Err(SessionError::InvalidSession(
                            "name a participant or ask for a dissenting voice, not both".into(),
                        ))
                    }
                    (Some(pid), false) => {
                        let seat = self.roster.seat_of(pid).ok_or_else(|| {
                            SessionError::guard(
                                Guard::NotAPractitioner,
                                format!("{pid} is not a practitioner of this session"),
                            )
                        })?;
                        (seat, PresenterPolicyUsed::Manual)
                    }
                    (None, true) => (self.dissenting_seat()?, PresenterPolicyUsed::Dissenting),
                    (None, false) => {
                        if s.config().presenter_policy == PresenterPolicy::Manual {
                            return Err(SessionError::guard(
                                Guard::ManualPresenterPolicy,
                                "this session selects presenters manually; name a participant",
                            ));
                        }
                        (s.rotation_starter(), PresenterPolicyUsed::Rotate)
                    }
                };
                vec![EventKind::PresenterSelected {
                    round_id,
                    seat,
                    policy,
                }]
            }
            Command::RecordExplanation { note } => {
                if let Actor::Practitioner(seat) = actor {
                    if s.floor_holder() != Some(seat) {
                        return Err(SessionError::guard(
                            Guard::NotAPractitioner,
                            format!("{seat} does not hold the floor"),
                        ));
                    }
                }
                vec![EventKind::ExplanationRecorded {
                    story_id: story,
                    position: s.floor_position().unwrap_or(0),
                    note: note.clone(),
                }]
            }
            Command::EndExplanations { early_exit } => vec![EventKind::ExplanationsEnded {
                early_exit: *early_exit,
            }],
            Command::UpdatePracticeTable { patch } => vec![EventKind::PracticeTableUpdated {
                story_id: story,
                patch: patch.clone(),
            }],
            Command::RecordVote {} => vec![EventKind::VoteRecorded { story_id: story }],
            Command::BeginValidation {} => vec![EventKind::ValidationStarted {
                story_id: story,
                rating: None,
                misinformation_note: None,
            }],
            Command::ResolveJudgment {
                story_id,
                rating,
                rationale,
            } => vec![EventKind::JudgmentResolved {
                story_id: story_id.clone().unwrap_or(story),
                rating: *rating,
                rationale: rationale.clone(),
            }],
            Command::ValidateFinding {
                outcome,
                corrections,
                dispute_text,
                misinformation_note,
            } => {
                let mut events: Vec<EventKind> = corrections
                    .iter()
                    .map(|c| EventKind::FindingCorrected {
                        story_id: story.clone(),
                        patch: c.patch.clone(),
                        note: c.note.clone(),
                    })
                    .collect();
                if let Some(text) = dispute_text {
                    events.push(EventKind::ParkingItemAdded {
                        item_id: s.parking().next_id(),
                        text: text.clone(),
                        tag: ParkingTag::Interpretation,
                        raised_during: None,
                    });
                }
                events.push(EventKind::FindingValidated {
                    story_id: story,
                    status: *outcome,
                    misinformation_note: misinformation_note.clone(),
                });
                events
            }
            Command::SetNoteworthy {
                story_id,
                noteworthy,
            } => vec![EventKind::NoteworthySet {
                story_id: story_id.clone().unwrap_or(story),
                noteworthy: *noteworthy,
            }],
            Command::Continue {} => {
                if s.phase() != Phase::ContinueDecision {
                    return Err(SessionError::IllegalTransition {
                        phase: s.phase(),
                        command: "continue".into(),
                    });
                }
                let cursor = s.cursor();
                let area = &s.catalog().process_areas[cursor.area];
                if cursor.story + 1 < area.stories().count() {
                    vec![EventKind::StoryPresented {
                        story_id: self.next_story_id(),
                    }]
                } else if cursor.area + 1 < s.catalog().process_areas.len() {
                    vec![EventKind::AreaStarted {
                        area_id: self.next_area_id(),
                    }]
                } else {
                    vec![EventKind::ParkingReviewStarted {}]
                }
            }
            Command::SkipProcessArea {
                reason,
                disposition,
            } => vec![EventKind::AreaSkipped {
                area_id: s.current_area_id().to_string(),
                reason: reason.clone(),
                disposition: *disposition,
            }],
            Command::AddParkingItem { text, tag } => {
                let tag = match actor {
                    Actor::Practitioner(_) => ParkingTag::Suggestion,
                    Actor::Assessor => tag.unwrap_or(ParkingTag::General),
                };
                vec![EventKind::ParkingItemAdded {
                    item_id: s.parking().next_id(),
                    text: text.clone(),
                    tag,
                    raised_during: None,
                }]
            }
            Command::AssignParkingItem {
                item_id,
                owner,
                evidence_note,
            } => {
                let seat = self.practitioner_seat(owner)?;
                vec![EventKind::ParkingItemAssigned {
                    item_id: *item_id,
                    owner_seat: seat,
                    evidence_note: evidence_note.clone(),
                }]
            }
            Command::OpenParkingClosure {} => vec![EventKind::ParkingClosureStarted {}],
            Command::CloseParkingItem {
                item_id,
                status,
                consensus_reached,
                evidence_note,
            } => {
                let consensus = match status {
                    ParkingStatus::AssessorDecided => false,
                    ParkingStatus::Resolved | ParkingStatus::AgreedToDisagree => {
                        consensus_reached.unwrap_or(true)
                    }
                    _ => consensus_reached.unwrap_or(false),
                };
                vec![EventKind::ParkingItemClosed {
                    item_id: *item_id,
                    status: *status,
                    consensus_reached: consensus,
                    evidence_note: evidence_note.clone(),
                }]
            }
            Command::CloseSession {} => vec![EventKind::SessionClosed {}],
            Command::DeactivateParticipant { participant_id } => {
                vec![EventKind::ParticipantDeactivated {
                    seat: self.practitioner_seat(participant_id)?,
                }]
            }
            Command::ReactivateParticipant { participant_id } => {
                vec![EventKind::ParticipantReactivated {
                    seat: self.practitioner_seat(participant_id)?,
                }]
            }
            Command::SetExternalInputs { text } => {
                vec![EventKind::ExternalInputsSet { text: text.clone() }]
            }
        };
        Ok(Plan::Events(events))
    }

    fn practitioner_seat(&self, participant_id: &str) -> Result<Seat, SessionError> {
        self.roster.seat_of(participant_id).ok_or_else(|| {
            SessionError::guard(
                Guard::NotAPractitioner,
                format!("{participant_id} is not a practitioner of this session"),
            )
        })
    }

    fn next_area_id(&self) -> String {
        let s = &self.session;
        let areas = &s.catalog().process_areas;
        let idx = if s.phase() == Phase::Welcome {
            0
        } else {
            (s.cursor().area + 1).min(areas.len() - 1)
        };
        areas[idx].id.clone()
    }

    fn next_story_id(&self) -> String {
        let s = &self.session;
        let cursor = s.cursor();
        let stories: Vec<_> = s.catalog().process_areas[cursor.area].stories().collect();
        let idx = if s.phase() == Phase::AreaIntro {
            0
        } else {
            (cursor.story + 1).min(stories.len() - 1)
        };
        stories[idx].id.clone()
    }

    fn open_round(&mut self, kind: RoundKind, incomplete_override: bool) -> EventKind {
        let n = self.session.active_seats().len();
        let ballot_tokens = (0..n)
            .map(|_| BallotToken::random(self.rng.as_mut()))
            .collect();
        EventKind::RoundOpened {
            round_id: self.session.rounds().next_id(),
            story_id: self.session.current_story_id().to_string(),
            round_kind: kind,
            ballot_tokens,
            incomplete_override,
        }
    }

    fn ballot_for(
        &mut self,
        seat: Seat,
        presented: Option<&BallotToken>,
    ) -> Result<BallotToken, SessionError> {
        let s = &self.session;
        let round = s.open_round().ok_or(SessionError::IllegalTransition {
            phase: s.phase(),
            command: "cast_vote".into(),
        })?;
        if !s.is_active(seat) {
            return Err(SessionError::guard(
                Guard::InactiveParticipant,
                format!("{seat} is not active and does not vote"),
            ));
        }
        match presented {
            Some(token) => {
                if self.ballots.claim(round, seat, token) {
                    Ok(token.clone())
                } else if round.has_ballot(token) || round.tokens().any(|t| t == token) {
                    Err(SessionError::guard(
                        Guard::BallotUnavailable,
                        "this ballot token belongs to another participant",
                    ))
                } else {
                    Err(crate::voting::VotingError::InvalidToken(round.id).into())
                }
            }
            None => self.ballots.token_for(round, seat).ok_or_else(|| {
                SessionError::guard(Guard::BallotUnavailable, "no unused ballot left in this round")
            }),
        }
    }

    fn dissenting_seat(&self) -> Result<Seat, SessionError> {
        let holders = self.dissenters.as_ref().ok_or_else(|| {
            SessionError::guard(
                Guard::DissentUnavailable,
                "dissenting votes are unknown for this round",
            )
        })?;
        let order = self.session.order_from(self.session.rotation_starter());
        order
            .into_iter()
            .find(|s| holders.contains(s))
            .ok_or_else(|| {
                SessionError::guard(
                    Guard::NoDissentingVote,
                    "no card was held by fewer practitioners than another",
                )
            })
    }
}

/// Writes the values replay would derive into a freshly applied event, so
/// live journals are self-describing.
fn fill_derived(kind: &mut EventKind, session: &Session) {
    match kind {
        EventKind::ValidationStarted {
            story_id,
            rating,
            misinformation_note,
        } => {
            let finding = session
                .workspace(story_id)
                .and_then(|w| w.finding.as_ref())
                .expect("validation started");
            *rating = Some(finding.rating);
            *misinformation_note = finding.misinformation_note.clone();
        }
        EventKind::ParkingItemAdded {
            item_id,
            raised_during,
            ..
        } => {
            let item = session.parking().get(*item_id).expect("item added");
            *raised_during = Some(item.raised_during.clone());
        }
        _ => {}
    }
}

enum Plan {
    Events(Vec<EventKind>),
    Reply(Value),
}

fn rename(e: SessionError, command: &str) -> SessionError {
    match e {
        SessionError::IllegalTransition { phase, .. } => SessionError::IllegalTransition {
            phase,
            command: command.to_string(),
        },
        other => other,
    }
}

/// Reply for a committed batch, computed from the batch and the state
/// right after it.
fn reply_for(events: &[JournalEvent], session: &Session) -> CommandReply {
    let last = events.last().expect("non-empty batch");
    let detail = match &last.kind {
        EventKind::RoundOpened {
            round_id,
            ballot_tokens,
            ..
        } => json!({ "round_id": round_id, "expected": ballot_tokens.len() }),
        EventKind::BallotCast { round_id, .. } => {
            let round = session.rounds().get(*round_id).expect("applied");
            json!({
                "round_id": round_id,
                "cast_count": round.cast_count(),
                "expected": round.expected(),
            })
        }
        EventKind::RoundRevealed { round_id, .. } => json!({
            "round_id": round_id,
            "distribution": session.rounds().get(*round_id).and_then(|r| r.distribution()),
        }),
        EventKind::PresenterSelected { seat, policy, .. } => json!({
            "seat": seat,
            "policy": policy,
            "speaking_order": session.speaking_order(),
        }),
        EventKind::ExplanationRecorded { position, .. } => json!({
            "position": position,
            "next_floor": session.floor_holder(),
        }),
        EventKind::ParkingItemAdded { item_id, .. } => json!({ "item_id": item_id }),
        EventKind::ValidationStarted { story_id, .. } => json!({
            "story_id": story_id,
            "finding": session.workspace(story_id).and_then(|w| w.finding.clone()),
        }),
        EventKind::StoryPresented { story_id } => json!({ "story_id": story_id }),
        EventKind::AreaStarted { area_id } => json!({ "area_id": area_id }),
        _ => json!({}),
    };
    CommandReply {
        first_seq: events.first().map(|e| e.seq),
        last_seq: Some(last.seq),
        phase: session.phase(),
        detail,
    }
}
