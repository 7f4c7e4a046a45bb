//! One group interview as a guarded state machine.
//!
//! [`Session`] is the journal-derived state. It is only ever changed by
//! [`Session::apply`], which checks every guard before mutating anything, so
//! a journal that replays cleanly is by construction a legal walk through the
//! phase graph. [`live::LiveSession`] turns participant commands into events.

pub mod events;
pub mod live;
pub mod parking;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, StoryCard};
use crate::rating::{
    self, classify_with_rule, dispersion, Dispersion, DispersionThresholds, ImplementationLevel,
    MaturityReference, PracticeRating, PracticeTable, RatingError, Rule, SkipDisposition,
};
use crate::voting::{
    RoundId, RoundKind, RoundLedger, RoundState, VoteDistribution, VoteRound, VotingError,
};
use crate::Seat;

use events::{EventKind, JournalEvent, PresenterPolicyUsed, SessionCreated, ValidationStatus};
use parking::{ParkingError, ParkingItem, ParkingLot, ParkingStatus, ParkingTag, RaisedDuring};

/// Recommended practitioner head-count; outside it the session only warns.
pub const RECOMMENDED_PRACTITIONERS: (u32, u32) = (2, 9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Welcome,
    AreaIntro,
    StoryPresented,
    Clarification,
    PreliminaryVoting,
    PreliminaryRevealed,
    Explaining,
    FollowOn,
    DefinitiveVoting,
    DefinitiveRevealed,
    VoteRecorded,
    FindingValidation,
    ContinueDecision,
    ParkingReview,
    ParkingClosure,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 16] = [
        Phase::Welcome,
        Phase::AreaIntro,
        Phase::StoryPresented,
        Phase::Clarification,
        Phase::PreliminaryVoting,
        Phase::PreliminaryRevealed,
        Phase::Explaining,
        Phase::FollowOn,
        Phase::DefinitiveVoting,
        Phase::DefinitiveRevealed,
        Phase::VoteRecorded,
        Phase::FindingValidation,
        Phase::ContinueDecision,
        Phase::ParkingReview,
        Phase::ParkingClosure,
        Phase::Closed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Welcome => "welcome",
            Phase::AreaIntro => "area_intro",
            Phase::StoryPresented => "story_presented",
            Phase::Clarification => "clarification",
            Phase::PreliminaryVoting => "preliminary_voting",
            Phase::PreliminaryRevealed => "preliminary_revealed",
            Phase::Explaining => "explaining",
            Phase::FollowOn => "follow_on",
            Phase::DefinitiveVoting => "definitive_voting",
            Phase::DefinitiveRevealed => "definitive_revealed",
            Phase::VoteRecorded => "vote_recorded",
            Phase::FindingValidation => "finding_validation",
            Phase::ContinueDecision => "continue_decision",
            Phase::ParkingReview => "parking_review",
            Phase::ParkingClosure => "parking_closure",
            Phase::Closed => "closed",
        }
    }

    /// Phases in which roster changes are allowed (no round in progress).
    fn between_stories(self) -> bool {
        matches!(
            self,
            Phase::Welcome
                | Phase::AreaIntro
                | Phase::StoryPresented
                | Phase::Clarification
                | Phase::ContinueDecision
                | Phase::ParkingReview
                | Phase::ParkingClosure
        )
    }

    pub fn has_story(self) -> bool {
        !matches!(
            self,
            Phase::Welcome | Phase::AreaIntro | Phase::ParkingReview | Phase::ParkingClosure | Phase::Closed
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every legal phase change. `Explaining -> Explaining` is the floor passing.
pub const PHASE_EDGES: &[(Phase, Phase)] = &[
    (Phase::Welcome, Phase::AreaIntro),
    (Phase::AreaIntro, Phase::StoryPresented),
    (Phase::StoryPresented, Phase::Clarification),
    (Phase::Clarification, Phase::PreliminaryVoting),
    (Phase::PreliminaryVoting, Phase::PreliminaryRevealed),
    (Phase::PreliminaryRevealed, Phase::Explaining),
    (Phase::Explaining, Phase::Explaining),
    (Phase::Explaining, Phase::FollowOn),
    (Phase::FollowOn, Phase::DefinitiveVoting),
    (Phase::DefinitiveVoting, Phase::DefinitiveRevealed),
    (Phase::DefinitiveRevealed, Phase::VoteRecorded),
    (Phase::VoteRecorded, Phase::FindingValidation),
    (Phase::FindingValidation, Phase::ContinueDecision),
    (Phase::ContinueDecision, Phase::StoryPresented),
    (Phase::ContinueDecision, Phase::AreaIntro),
    (Phase::ContinueDecision, Phase::ParkingReview),
    (Phase::ParkingReview, Phase::ParkingClosure),
    (Phase::ParkingClosure, Phase::Closed),
];

pub fn is_declared_edge(from: Phase, to: Phase) -> bool {
    PHASE_EDGES.contains(&(from, to))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenterPolicy {
    #[default]
    Rotate,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Advisory; expiry never advances the session.
    pub clarification_timebox_seconds: u32,
    pub presenter_policy: PresenterPolicy,
    pub warn_participant_bounds: bool,
    pub dispersion: DispersionThresholds,
    pub maturity_reference: MaturityReference,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            clarification_timebox_seconds: 300,
            presenter_policy: PresenterPolicy::Rotate,
            warn_participant_bounds: true,
            dispersion: DispersionThresholds::default(),
            maturity_reference: MaturityReference::default(),
        }
    }
}

/// Named guards, so every rejection can be traced to one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    VotesOutstanding,
    ExplanationsIncomplete,
    ExplanationsComplete,
    PracticeTableIncomplete,
    StoriesRemaining,
    NoMoreStories,
    NoMoreAreas,
    WrongTarget,
    RotationOrder,
    ManualPresenterPolicy,
    NoDissentingVote,
    DissentUnavailable,
    NotAPractitioner,
    InactiveParticipant,
    MidRoundRosterChange,
    LastActivePractitioner,
    BallotTokens,
    BallotUnavailable,
    JudgmentUnresolved,
    NoCorrections,
    DisputeNotParked,
    NotYetRated,
    EmptyText,
    ParkingItemsOpen,
    ParkingItemsUnsettled,
    ConsensusForced,
}

impl Guard {
    pub fn name(self) -> &'static str {
        match self {
            Guard::VotesOutstanding => "votes_outstanding",
            Guard::ExplanationsIncomplete => "explanations_incomplete",
            Guard::ExplanationsComplete => "explanations_complete",
            Guard::PracticeTableIncomplete => "practice_table_incomplete",
            Guard::StoriesRemaining => "stories_remaining",
            Guard::NoMoreStories => "no_more_stories",
            Guard::NoMoreAreas => "no_more_areas",
            Guard::WrongTarget => "wrong_target",
            Guard::RotationOrder => "rotation_order",
            Guard::ManualPresenterPolicy => "manual_presenter_policy",
            Guard::NoDissentingVote => "no_dissenting_vote",
            Guard::DissentUnavailable => "dissent_unavailable",
            Guard::NotAPractitioner => "not_a_practitioner",
            Guard::InactiveParticipant => "inactive_participant",
            Guard::MidRoundRosterChange => "mid_round_roster_change",
            Guard::LastActivePractitioner => "last_active_practitioner",
            Guard::BallotTokens => "ballot_tokens",
            Guard::BallotUnavailable => "ballot_unavailable",
            Guard::JudgmentUnresolved => "judgment_unresolved",
            Guard::NoCorrections => "no_corrections",
            Guard::DisputeNotParked => "dispute_not_parked",
            Guard::NotYetRated => "not_yet_rated",
            Guard::EmptyText => "empty_text",
            Guard::ParkingItemsOpen => "parking_items_open",
            Guard::ParkingItemsUnsettled => "parking_items_unsettled",
            Guard::ConsensusForced => "consensus_forced",
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("illegal transition: {command} is not allowed in phase {phase}")]
    IllegalTransition { phase: Phase, command: String },
    #[error("{detail} [{guard}]")]
    Guard { guard: Guard, detail: String },
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Parking(#[from] ParkingError),
    #[error("out of turn: position {expected} holds the floor")]
    OutOfTurn { expected: u32, got: u32 },
    #[error("unknown story {0}")]
    UnknownStory(String),
    #[error("unknown {0}")]
    UnknownSeat(Seat),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("corrupt journal: {0}")]
    Corrupt(String),
}

impl SessionError {
    pub(crate) fn guard(guard: Guard, detail: impl Into<String>) -> Self {
        SessionError::Guard {
            guard,
            detail: detail.into(),
        }
    }

    /// Stable machine-readable name of the rule that rejected the input.
    pub fn code(&self) -> String {
        match self {
            SessionError::IllegalTransition { .. } => "illegal_transition".into(),
            SessionError::Guard { guard, .. } => format!("guard:{guard}"),
            SessionError::Voting(e) => match e {
                VotingError::DuplicateRound { .. } => "voting:duplicate_round",
                VotingError::UnknownRound(_) => "voting:unknown_round",
                VotingError::LateVote(_) => "voting:late_vote",
                VotingError::InvalidToken(_) => "voting:invalid_token",
                VotingError::Outstanding { .. } => "voting:outstanding",
                VotingError::NoTokens => "voting:no_tokens",
                VotingError::OutOfSequence { .. } => "voting:out_of_sequence",
            }
            .into(),
            SessionError::Rating(e) => match e {
                RatingError::EmptyDistribution => "rating:empty_distribution",
                RatingError::NotNeedsJudgment { .. } => "rating:not_needs_judgment",
                RatingError::EmptyRationale => "rating:empty_rationale",
                RatingError::UnresolvedJudgment { .. } => "rating:unresolved_judgment",
            }
            .into(),
            SessionError::Parking(e) => match e {
                ParkingError::UnknownItem(_) => "parking:unknown_item",
                ParkingError::AlreadyClosed(_) => "parking:already_closed",
                ParkingError::OutOfSequence { .. } => "parking:out_of_sequence",
                ParkingError::EmptyText => "parking:empty_text",
                ParkingError::NotAClosingStatus => "parking:not_a_closing_status",
            }
            .into(),
            SessionError::OutOfTurn { .. } => "out_of_turn".into(),
            SessionError::UnknownStory(_) => "unknown_story".into(),
            SessionError::UnknownSeat(_) => "unknown_seat".into(),
            SessionError::InvalidSession(_) => "invalid_session".into(),
            SessionError::Corrupt(_) => "corrupt_journal".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub rating: ImplementationLevel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub position: u32,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub note: String,
    pub patch: PracticeTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreliminaryFinding {
    /// Rating read from the definitive votes.
    pub rating: PracticeRating,
    pub rationale: String,
    pub misinformation_note: Option<String>,
    pub validation: Option<ValidationStatus>,
}

/// Everything captured for one story.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryWorkspace {
    pub presented: bool,
    pub skipped: bool,
    pub preliminary_round: Option<RoundId>,
    pub definitive_round: Option<RoundId>,
    pub preliminary_rating: Option<PracticeRating>,
    pub definitive: Option<VoteDistribution>,
    pub rule: Option<Rule>,
    pub dispersion: Option<Dispersion>,
    pub judgment: Option<Judgment>,
    pub practice_table: PracticeTable,
    pub incomplete_override: bool,
    pub explanations: Vec<Explanation>,
    pub early_exit: bool,
    pub finding: Option<PreliminaryFinding>,
    pub corrections: Vec<Correction>,
    pub noteworthy: bool,
}

impl StoryWorkspace {
    /// Current rating: a settled judgment beats the vote classification;
    /// skipped stories are not rated; `None` until the definitive reveal.
    pub fn rating(&self) -> Option<PracticeRating> {
        if let Some(j) = &self.judgment {
            return Some(j.rating.into());
        }
        if let Some(rule) = self.rule {
            return Some(rule.rating());
        }
        if self.skipped {
            return Some(PracticeRating::NotRated);
        }
        None
    }

    pub fn needs_judgment(&self) -> bool {
        self.rating() == Some(PracticeRating::NeedsJudgment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaSkip {
    pub reason: String,
    pub disposition: SkipDisposition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Turns {
    order: Vec<Seat>,
    spoken: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub area: usize,
    pub story: usize,
}

/// State of one interview, rebuilt exactly by replaying its journal.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    catalog: Arc<Catalog>,
    config: SessionConfig,
    created_at: DateTime<Utc>,
    last_seq: u64,
    last_ts: DateTime<Utc>,
    active: Vec<bool>,
    phase: Phase,
    cursor: Cursor,
    area_stories: Vec<Vec<String>>,
    workspaces: BTreeMap<String, StoryWorkspace>,
    rounds: RoundLedger,
    current_round: Option<RoundId>,
    presenter_rounds: u32,
    turns: Option<Turns>,
    parking: ParkingLot,
    skips: BTreeMap<String, AreaSkip>,
    warnings: Vec<String>,
    external_inputs: Option<String>,
}

impl Session {
    /// Builds the initial state from a `session_created` event.
    pub fn create(event: &JournalEvent) -> Result<Session, SessionError> {
        let EventKind::SessionCreated(created) = &event.kind else {
            return Err(SessionError::Corrupt(format!(
                "journal must start with session_created, found {}",
                event.kind.name()
            )));
        };
        if event.seq != 1 {
            return Err(SessionError::Corrupt(format!(
                "session_created must have seq 1, found {}",
                event.seq
            )));
        }
        Self::from_created(created, event.ts)
    }

    fn from_created(created: &SessionCreated, ts: DateTime<Utc>) -> Result<Session, SessionError> {
        let catalog = &created.catalog;
        catalog
            .validate()
            .map_err(|e| SessionError::InvalidSession(e.to_string()))?;
        if catalog.process_areas.is_empty() {
            return Err(SessionError::InvalidSession("catalog has no process areas".into()));
        }
        if created.practitioner_count == 0 {
            return Err(SessionError::InvalidSession("roster has no practitioners".into()));
        }
        let mut active = vec![true; created.practitioner_count as usize];
        for seat in &created.inactive_seats {
            let slot = active
                .get_mut(seat.0 as usize)
                .ok_or(SessionError::UnknownSeat(*seat))?;
            *slot = false;
        }
        if !active.iter().any(|a| *a) {
            return Err(SessionError::InvalidSession("no active practitioner".into()));
        }
        let area_stories: Vec<Vec<String>> = catalog
            .process_areas
            .iter()
            .map(|a| a.stories().map(|s| s.id.clone()).collect())
            .collect();
        let workspaces = area_stories
            .iter()
            .flatten()
            .map(|id| (id.clone(), StoryWorkspace::default()))
            .collect();
        Ok(Session {
            id: created.session_id.clone(),
            catalog: Arc::new(catalog.clone()),
            config: created.config.clone(),
            created_at: ts,
            last_seq: 1,
            last_ts: ts,
            active,
            phase: Phase::Welcome,
            cursor: Cursor { area: 0, story: 0 },
            area_stories,
            workspaces,
            rounds: RoundLedger::default(),
            current_round: None,
            presenter_rounds: 0,
            turns: None,
            parking: ParkingLot::default(),
            skips: BTreeMap::new(),
            warnings: Vec::new(),
            external_inputs: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_ts(&self) -> DateTime<Utc> {
        self.last_ts
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    pub fn practitioner_count(&self) -> u32 {
        self.active.len() as u32
    }

    pub fn is_active(&self, seat: Seat) -> bool {
        self.active.get(seat.0 as usize).copied().unwrap_or(false)
    }

    pub fn active_seats(&self) -> Vec<Seat> {
        (0..self.active.len() as u32)
            .map(Seat)
            .filter(|s| self.is_active(*s))
            .collect()
    }

    pub fn rounds(&self) -> &RoundLedger {
        &self.rounds
    }

    pub fn current_round(&self) -> Option<&VoteRound> {
        self.current_round.and_then(|id| self.rounds.get(id))
    }

    pub fn open_round(&self) -> Option<&VoteRound> {
        self.current_round().filter(|r| r.state == RoundState::Open)
    }

    pub fn parking(&self) -> &ParkingLot {
        &self.parking
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn external_inputs(&self) -> Option<&str> {
        self.external_inputs.as_deref()
    }

    pub fn skips(&self) -> &BTreeMap<String, AreaSkip> {
        &self.skips
    }

    pub fn workspace(&self, story_id: &str) -> Option<&StoryWorkspace> {
        self.workspaces.get(story_id)
    }

    pub fn current_area_id(&self) -> &str {
        &self.catalog.process_areas[self.cursor.area].id
    }

    pub fn current_story_id(&self) -> &str {
        &self.area_stories[self.cursor.area][self.cursor.story]
    }

    pub fn current_story(&self) -> &StoryCard {
        self.catalog
            .story(self.current_story_id())
            .expect("cursor addresses a catalog story")
    }

    /// Seat whose turn it is to explain, while explanations are running.
    pub fn floor_holder(&self) -> Option<Seat> {
        let turns = self.turns.as_ref()?;
        turns.order.get(turns.spoken as usize).copied()
    }

    /// Position in the speaking order whose turn it is.
    pub fn floor_position(&self) -> Option<u32> {
        self.turns.as_ref().map(|t| t.spoken)
    }

    /// Speaking order of the current explanation round.
    pub fn speaking_order(&self) -> Option<&[Seat]> {
        self.turns.as_ref().map(|t| t.order.as_slice())
    }

    /// Explanation rounds started so far.
    pub fn presenter_rounds(&self) -> u32 {
        self.presenter_rounds
    }

    /// Default starter: rotate the starting index by one per round over the
    /// fixed seating order, skipping inactive seats.
    pub fn rotation_starter(&self) -> Seat {
        let n = self.active.len() as u32;
        let start = self.presenter_rounds % n;
        (0..n)
            .map(|k| Seat((start + k) % n))
            .find(|s| self.is_active(*s))
            .expect("at least one active practitioner")
    }

    /// Active seats in rotation order beginning at `first`.
    pub fn order_from(&self, first: Seat) -> Vec<Seat> {
        let n = self.active.len() as u32;
        (0..n)
            .map(|k| Seat((first.0 + k) % n))
            .filter(|s| self.is_active(*s))
            .collect()
    }

    /// Terminal ratings of every story, keyed by story id. Stories not yet
    /// through the definitive vote are omitted.
    pub fn ratings(&self) -> BTreeMap<String, PracticeRating> {
        self.workspaces
            .iter()
            .filter_map(|(id, ws)| ws.rating().map(|r| (id.clone(), r)))
            .collect()
    }

    pub fn unresolved_judgments(&self) -> Vec<String> {
        self.catalog
            .stories()
            .map(|(_, _, s)| &s.id)
            .filter(|id| self.workspaces[*id].needs_judgment())
            .cloned()
            .collect()
    }

    fn expect_phase(&self, allowed: &[Phase], command: &str) -> Result<(), SessionError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(SessionError::IllegalTransition {
                phase: self.phase,
                command: command.to_string(),
            })
        }
    }

    fn expect_current_story(&self, story_id: &str) -> Result<(), SessionError> {
        let current = self.current_story_id();
        if story_id != current {
            if !self.workspaces.contains_key(story_id) {
                return Err(SessionError::UnknownStory(story_id.to_string()));
            }
            return Err(SessionError::guard(
                Guard::WrongTarget,
                format!("{current} is the current story, not {story_id}"),
            ));
        }
        Ok(())
    }

    fn workspace_mut(&mut self, story_id: &str) -> &mut StoryWorkspace {
        self.workspaces
            .get_mut(story_id)
            .expect("story id checked before mutation")
    }

    fn known_story(&self, story_id: &str) -> Result<&StoryWorkspace, SessionError> {
        self.workspaces
            .get(story_id)
            .ok_or_else(|| SessionError::UnknownStory(story_id.to_string()))
    }

    fn check_seat(&self, seat: Seat) -> Result<(), SessionError> {
        if seat.0 as usize >= self.active.len() {
            return Err(SessionError::UnknownSeat(seat));
        }
        if !self.is_active(seat) {
            return Err(SessionError::guard(
                Guard::InactiveParticipant,
                format!("{seat} is not active"),
            ));
        }
        Ok(())
    }

    fn require_text(text: &str, what: &str) -> Result<(), SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::guard(Guard::EmptyText, format!("{what} must not be empty")));
        }
        Ok(())
    }

    fn is_last_story_in_area(&self) -> bool {
        self.cursor.story + 1 == self.area_stories[self.cursor.area].len()
    }

    fn is_last_area(&self) -> bool {
        self.cursor.area + 1 == self.area_stories.len()
    }

    fn raised_during(&self) -> RaisedDuring {
        let in_area = !matches!(
            self.phase,
            Phase::Welcome | Phase::ParkingReview | Phase::ParkingClosure | Phase::Closed
        );
        RaisedDuring {
            phase: self.phase,
            area_id: in_area.then(|| self.current_area_id().to_string()),
            story_id: self.phase.has_story().then(|| self.current_story_id().to_string()),
        }
    }

    fn misinformation_draft(preliminary: PracticeRating, definitive: PracticeRating) -> String {
        format!(
            "preliminary votes read as {} but definitive votes read as {}; note whether misinformation or unequal information explains the change",
            preliminary.abbrev(),
            definitive.abbrev()
        )
    }

    /// Validates and applies one journal event. On error nothing changes.
    pub fn apply(&mut self, event: &JournalEvent) -> Result<(), SessionError> {
        if event.seq != self.last_seq + 1 {
            return Err(SessionError::Corrupt(format!(
                "expected seq {}, found {}",
                self.last_seq + 1,
                event.seq
            )));
        }
        if event.ts < self.last_ts {
            return Err(SessionError::Corrupt(format!(
                "timestamp of seq {} goes backwards",
                event.seq
            )));
        }
        if self.phase == Phase::Closed {
            return Err(SessionError::IllegalTransition {
                phase: self.phase,
                command: event.kind.name().to_string(),
            });
        }
        self.apply_kind(&event.kind)?;
        self.last_seq = event.seq;
        self.last_ts = event.ts;
        Ok(())
    }

    fn apply_kind(&mut self, kind: &EventKind) -> Result<(), SessionError> {
        let name = kind.name();
        match kind {
            EventKind::SessionCreated(_) => Err(SessionError::Corrupt(
                "session_created may only appear as the first event".into(),
            )),
            EventKind::RosterWarning {
                practitioner_count, ..
            } => {
                self.expect_phase(&[Phase::Welcome], name)?;
                if *practitioner_count != self.practitioner_count() {
                    return Err(SessionError::Corrupt(
                        "roster warning does not match the roster size".into(),
                    ));
                }
                self.warnings.push(format!(
                    "{practitioner_count} practitioner(s); {}..={} recommended",
                    RECOMMENDED_PRACTITIONERS.0, RECOMMENDED_PRACTITIONERS.1
                ));
                Ok(())
            }
            EventKind::AreaStarted { area_id } => self.on_area_started(area_id),
            EventKind::StoryPresented { story_id } => self.on_story_presented(story_id),
            EventKind::ClarificationOpened { story_id, .. } => {
                self.expect_phase(&[Phase::StoryPresented], name)?;
                self.expect_current_story(story_id)?;
                self.phase = Phase::Clarification;
                Ok(())
            }
            EventKind::RoundOpened {
                round_id,
                story_id,
                round_kind,
                ballot_tokens,
                incomplete_override,
            } => self.on_round_opened(
                *round_id,
                story_id,
                *round_kind,
                ballot_tokens,
                *incomplete_override,
            ),
            EventKind::BallotCast {
                round_id,
                ballot_token,
                card,
            } => {
                if let Some(round) = self.rounds.get(*round_id) {
                    if round.state == RoundState::Revealed {
                        return Err(VotingError::LateVote(*round_id).into());
                    }
                }
                self.expect_phase(&[Phase::PreliminaryVoting, Phase::DefinitiveVoting], name)?;
                if Some(*round_id) != self.current_round {
                    return Err(VotingError::UnknownRound(*round_id).into());
                }
                self.rounds.cast(*round_id, ballot_token, *card)?;
                Ok(())
            }
            EventKind::RoundRevealed {
                round_id,
                distribution,
            } => self.on_round_revealed(*round_id, distribution.as_ref()),
            EventKind::PresenterSelected {
                round_id,
                seat,
                policy,
            } => self.on_presenter_selected(*round_id, *seat, *policy),
            EventKind::ExplanationRecorded {
                story_id,
                position,
                note,
            } => {
                self.expect_phase(&[Phase::Explaining], name)?;
                self.expect_current_story(story_id)?;
                let turns = self.turns.as_ref().expect("explaining has turns");
                if turns.spoken as usize >= turns.order.len() {
                    return Err(SessionError::guard(
                        Guard::ExplanationsComplete,
                        "every practitioner has already held the floor",
                    ));
                }
                if *position != turns.spoken {
                    return Err(SessionError::OutOfTurn {
                        expected: turns.spoken,
                        got: *position,
                    });
                }
                self.turns.as_mut().expect("checked").spoken += 1;
                let story_id = story_id.clone();
                self.workspace_mut(&story_id).explanations.push(Explanation {
                    position: *position,
                    note: note.clone(),
                });
                Ok(())
            }
            EventKind::ExplanationsEnded { early_exit } => {
                self.expect_phase(&[Phase::Explaining], name)?;
                let turns = self.turns.as_ref().expect("explaining has turns");
                let remaining = turns.order.len() as u32 - turns.spoken;
                if remaining > 0 && !early_exit {
                    return Err(SessionError::guard(
                        Guard::ExplanationsIncomplete,
                        format!("{remaining} practitioner(s) have not held the floor"),
                    ));
                }
                let story_id = self.current_story_id().to_string();
                self.workspace_mut(&story_id).early_exit = remaining > 0;
                self.turns = None;
                self.phase = Phase::FollowOn;
                Ok(())
            }
            EventKind::PracticeTableUpdated { story_id, patch } => {
                self.expect_phase(&[Phase::Explaining, Phase::FollowOn], name)?;
                self.expect_current_story(story_id)?;
                self.workspace_mut(story_id).practice_table.merge(patch);
                Ok(())
            }
            EventKind::VoteRecorded { story_id } => {
                self.expect_phase(&[Phase::DefinitiveRevealed], name)?;
                self.expect_current_story(story_id)?;
                self.current_round = None;
                self.phase = Phase::VoteRecorded;
                Ok(())
            }
            EventKind::ValidationStarted {
                story_id,
                rating,
                misinformation_note,
            } => self.on_validation_started(story_id, *rating, misinformation_note.as_deref()),
            EventKind::JudgmentResolved {
                story_id,
                rating,
                rationale,
            } => {
                let ws = self.known_story(story_id)?;
                let current = ws.rating().ok_or_else(|| {
                    SessionError::guard(
                        Guard::NotYetRated,
                        format!("{story_id} has no definitive vote yet"),
                    )
                })?;
                rating::resolve_judgment(story_id, current, *rating, rationale)?;
                self.workspace_mut(story_id).judgment = Some(Judgment {
                    rating: *rating,
                    rationale: rationale.clone(),
                });
                Ok(())
            }
            EventKind::FindingCorrected {
                story_id,
                patch,
                note,
            } => {
                self.expect_phase(&[Phase::FindingValidation], name)?;
                self.expect_current_story(story_id)?;
                Self::require_text(note, "correction note")?;
                let ws = self.workspace_mut(story_id);
                ws.practice_table.merge(patch);
                ws.corrections.push(Correction {
                    note: note.clone(),
                    patch: patch.clone(),
                });
                Ok(())
            }
            EventKind::FindingValidated {
                story_id,
                status,
                misinformation_note,
            } => self.on_finding_validated(story_id, *status, misinformation_note.as_deref()),
            EventKind::NoteworthySet {
                story_id,
                noteworthy,
            } => {
                let ws = self.known_story(story_id)?;
                if ws.definitive.is_none() {
                    return Err(SessionError::guard(
                        Guard::NotYetRated,
                        format!("{story_id} has no definitive vote yet"),
                    ));
                }
                self.workspace_mut(story_id).noteworthy = *noteworthy;
                Ok(())
            }
            EventKind::AreaSkipped {
                area_id,
                reason,
                disposition,
            } => self.on_area_skipped(area_id, reason, *disposition),
            EventKind::ParkingReviewStarted {} => {
                self.expect_phase(&[Phase::ContinueDecision], name)?;
                if !(self.is_last_area() && self.is_last_story_in_area()) {
                    return Err(SessionError::guard(
                        Guard::StoriesRemaining,
                        "stories remain to be assessed; continue or skip the area",
                    ));
                }
                self.phase = Phase::ParkingReview;
                Ok(())
            }
            EventKind::ParkingItemAdded {
                item_id,
                text,
                tag,
                raised_during,
            } => {
                let raised = self.raised_during();
                if let Some(given) = raised_during {
                    if *given != raised {
                        return Err(SessionError::Corrupt(format!(
                            "parking item {item_id} raised_during does not match the session state"
                        )));
                    }
                }
                self.parking.add(*item_id, text, *tag, raised)?;
                Ok(())
            }
            EventKind::ParkingItemAssigned {
                item_id,
                owner_seat,
                evidence_note,
            } => {
                self.expect_phase(&[Phase::ParkingReview], name)?;
                self.check_seat(*owner_seat)?;
                self.parking
                    .assign(*item_id, *owner_seat, evidence_note.as_deref())?;
                Ok(())
            }
            EventKind::ParkingItemClosed {
                item_id,
                status,
                consensus_reached,
                evidence_note,
            } => {
                if !(self.phase == Phase::ParkingClosure
                    || (self.phase == Phase::ParkingReview && *status == ParkingStatus::Resolved))
                {
                    return Err(SessionError::IllegalTransition {
                        phase: self.phase,
                        command: format!("{name} ({status:?})"),
                    });
                }
                if *status == ParkingStatus::AssessorDecided && *consensus_reached {
                    return Err(SessionError::guard(
                        Guard::ConsensusForced,
                        "an item decided by the assessor records that consensus was not reached",
                    ));
                }
                self.parking
                    .close(*item_id, *status, *consensus_reached, evidence_note.as_deref())?;
                Ok(())
            }
            EventKind::ParkingClosureStarted {} => {
                self.expect_phase(&[Phase::ParkingReview], name)?;
                let open = self.parking.count(ParkingStatus::Open);
                if open > 0 {
                    return Err(SessionError::guard(
                        Guard::ParkingItemsOpen,
                        format!("{open} parking item(s) still open; resolve or assign them"),
                    ));
                }
                self.phase = Phase::ParkingClosure;
                Ok(())
            }
            EventKind::SessionClosed {} => {
                self.expect_phase(&[Phase::ParkingClosure], name)?;
                let unsettled = self.parking.unsettled();
                if unsettled > 0 {
                    return Err(SessionError::guard(
                        Guard::ParkingItemsUnsettled,
                        format!("{unsettled} parking item(s) not yet closed"),
                    ));
                }
                let unresolved = self.unresolved_judgments();
                if !unresolved.is_empty() {
                    return Err(SessionError::guard(
                        Guard::JudgmentUnresolved,
                        format!("assessor judgment pending for {}", unresolved.join(", ")),
                    ));
                }
                self.phase = Phase::Closed;
                Ok(())
            }
            EventKind::ParticipantDeactivated { seat } => {
                self.check_roster_change(*seat, name)?;
                if !self.is_active(*seat) {
                    return Err(SessionError::guard(
                        Guard::InactiveParticipant,
                        format!("{seat} is already inactive"),
                    ));
                }
                if self.active_seats().len() == 1 {
                    return Err(SessionError::guard(
                        Guard::LastActivePractitioner,
                        "the last active practitioner cannot leave",
                    ));
                }
                self.active[seat.0 as usize] = false;
                Ok(())
            }
            EventKind::ParticipantReactivated { seat } => {
                self.check_roster_change(*seat, name)?;
                if self.is_active(*seat) {
                    return Err(SessionError::guard(
                        Guard::InactiveParticipant,
                        format!("{seat} is already active"),
                    ));
                }
                self.active[seat.0 as usize] = true;
                Ok(())
            }
            EventKind::ExternalInputsSet { text } => {
                self.external_inputs = (!text.trim().is_empty()).then(|| text.clone());
                Ok(())
            }
        }
    }

    fn check_roster_change(&self, seat: Seat, name: &str) -> Result<(), SessionError> {
        if seat.0 as usize >= self.active.len() {
            return Err(SessionError::UnknownSeat(seat));
        }
        if !self.phase.between_stories() {
            return Err(SessionError::guard(
                Guard::MidRoundRosterChange,
                format!("{name} is only allowed between stories, not during {}", self.phase),
            ));
        }
        Ok(())
    }

    fn on_area_started(&mut self, area_id: &str) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::Welcome, Phase::ContinueDecision], "area_started")?;
        let target = if self.phase == Phase::Welcome {
            0
        } else {
            if !self.is_last_story_in_area() {
                let left = self.area_stories[self.cursor.area].len() - self.cursor.story - 1;
                return Err(SessionError::guard(
                    Guard::StoriesRemaining,
                    format!(
                        "{left} story(ies) remain in {}; continue with the next story or skip the area",
                        self.current_area_id()
                    ),
                ));
            }
            if self.is_last_area() {
                return Err(SessionError::guard(
                    Guard::NoMoreAreas,
                    "no further process area; start the parking lot review",
                ));
            }
            self.cursor.area + 1
        };
        let expected = &self.catalog.process_areas[target].id;
        if area_id != expected {
            return Err(SessionError::guard(
                Guard::WrongTarget,
                format!("next area is {expected}, not {area_id}"),
            ));
        }
        self.cursor = Cursor {
            area: target,
            story: 0,
        };
        self.phase = Phase::AreaIntro;
        Ok(())
    }

    fn on_story_presented(&mut self, story_id: &str) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::AreaIntro, Phase::ContinueDecision], "story_presented")?;
        let target = if self.phase == Phase::AreaIntro {
            0
        } else {
            if self.is_last_story_in_area() {
                return Err(SessionError::guard(
                    Guard::NoMoreStories,
                    format!(
                        "{} has no further stories; move on to the next area",
                        self.current_area_id()
                    ),
                ));
            }
            self.cursor.story + 1
        };
        let expected = &self.area_stories[self.cursor.area][target];
        if story_id != expected {
            if !self.workspaces.contains_key(story_id) {
                return Err(SessionError::UnknownStory(story_id.to_string()));
            }
            return Err(SessionError::guard(
                Guard::WrongTarget,
                format!("next story is {expected}, not {story_id}"),
            ));
        }
        self.cursor.story = target;
        self.workspace_mut(story_id).presented = true;
        self.phase = Phase::StoryPresented;
        Ok(())
    }

    fn on_round_opened(
        &mut self,
        round_id: RoundId,
        story_id: &str,
        kind: RoundKind,
        tokens: &[crate::voting::BallotToken],
        incomplete_override: bool,
    ) -> Result<(), SessionError> {
        let name = "round_opened";
        match kind {
            RoundKind::Preliminary => self.expect_phase(&[Phase::Clarification], name)?,
            RoundKind::Definitive => self.expect_phase(&[Phase::FollowOn], name)?,
        }
        self.expect_current_story(story_id)?;
        let active = self.active_seats().len();
        if tokens.len() != active {
            return Err(SessionError::guard(
                Guard::BallotTokens,
                format!(
                    "{} ballot token(s) for {active} active practitioner(s)",
                    tokens.len()
                ),
            ));
        }
        if kind == RoundKind::Definitive && !incomplete_override {
            let missing = self.workspaces[story_id].practice_table.missing_fields();
            if !missing.is_empty() {
                return Err(SessionError::guard(
                    Guard::PracticeTableIncomplete,
                    format!("practice table incomplete: {}", missing.join(", ")),
                ));
            }
        }
        self.rounds.check_open(round_id, story_id, kind, tokens)?;
        self.rounds.open(round_id, story_id, kind, tokens)?;
        self.current_round = Some(round_id);
        let ws = self.workspace_mut(story_id);
        match kind {
            RoundKind::Preliminary => {
                ws.preliminary_round = Some(round_id);
                self.phase = Phase::PreliminaryVoting;
            }
            RoundKind::Definitive => {
                ws.definitive_round = Some(round_id);
                ws.incomplete_override = incomplete_override;
                self.phase = Phase::DefinitiveVoting;
            }
        }
        Ok(())
    }

    fn on_round_revealed(
        &mut self,
        round_id: RoundId,
        given: Option<&VoteDistribution>,
    ) -> Result<(), SessionError> {
        self.expect_phase(
            &[Phase::PreliminaryVoting, Phase::DefinitiveVoting],
            "round_revealed",
        )?;
        if Some(round_id) != self.current_round {
            return Err(VotingError::UnknownRound(round_id).into());
        }
        let distribution = self.rounds.tally(round_id).map_err(|e| match e {
            VotingError::Outstanding { .. } => SessionError::guard(Guard::VotesOutstanding, e.to_string()),
            other => other.into(),
        })?;
        if let Some(given) = given {
            if *given != distribution {
                return Err(SessionError::Corrupt(format!(
                    "{round_id} distribution does not match its ballots"
                )));
            }
        }
        let rule = classify_with_rule(&distribution)?;
        let spread = dispersion(&distribution, &self.config.dispersion)?;
        self.rounds.reveal(round_id)?;
        let story_id = self.current_story_id().to_string();
        let phase = self.phase;
        let ws = self.workspace_mut(&story_id);
        if phase == Phase::PreliminaryVoting {
            ws.preliminary_rating = Some(rule.rating());
            self.phase = Phase::PreliminaryRevealed;
        } else {
            ws.definitive = Some(distribution);
            ws.rule = Some(rule);
            ws.dispersion = Some(spread);
            self.phase = Phase::DefinitiveRevealed;
        }
        Ok(())
    }

    fn on_presenter_selected(
        &mut self,
        round_id: RoundId,
        seat: Seat,
        policy: PresenterPolicyUsed,
    ) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::PreliminaryRevealed], "presenter_selected")?;
        if Some(round_id) != self.current_round {
            return Err(VotingError::UnknownRound(round_id).into());
        }
        self.check_seat(seat)?;
        if policy == PresenterPolicyUsed::Rotate {
            if self.config.presenter_policy == PresenterPolicy::Manual {
                return Err(SessionError::guard(
                    Guard::ManualPresenterPolicy,
                    "this session selects presenters manually; name a participant",
                ));
            }
            let expected = self.rotation_starter();
            if seat != expected {
                return Err(SessionError::guard(
                    Guard::RotationOrder,
                    format!("rotation starts with {expected}, not {seat}"),
                ));
            }
        }
        self.presenter_rounds += 1;
        self.turns = Some(Turns {
            order: self.order_from(seat),
            spoken: 0,
        });
        self.phase = Phase::Explaining;
        Ok(())
    }

    fn on_validation_started(
        &mut self,
        story_id: &str,
        given_rating: Option<PracticeRating>,
        given_note: Option<&str>,
    ) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::VoteRecorded], "validation_started")?;
        self.expect_current_story(story_id)?;
        let ws = &self.workspaces[story_id];
        let distribution = ws.definitive.expect("definitive round revealed");
        let rule = ws.rule.expect("classified at reveal");
        let rating = rule.rating();
        let note = match ws.preliminary_rating {
            Some(prelim) if prelim != rating => Some(Self::misinformation_draft(prelim, rating)),
            _ => None,
        };
        if given_rating.is_some_and(|r| r != rating) {
            return Err(SessionError::Corrupt(format!(
                "{story_id} rating does not match its definitive votes"
            )));
        }
        if given_note.is_some() && given_note != note.as_deref() {
            return Err(SessionError::Corrupt(format!(
                "{story_id} misinformation draft does not match its votes"
            )));
        }
        let rationale = rating::rule_rationale(rule, &distribution);
        self.workspace_mut(story_id).finding = Some(PreliminaryFinding {
            rating,
            rationale,
            misinformation_note: note,
            validation: None,
        });
        self.phase = Phase::FindingValidation;
        Ok(())
    }

    fn on_finding_validated(
        &mut self,
        story_id: &str,
        status: ValidationStatus,
        note: Option<&str>,
    ) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::FindingValidation], "finding_validated")?;
        self.expect_current_story(story_id)?;
        let ws = &self.workspaces[story_id];
        match status {
            ValidationStatus::Confirmed | ValidationStatus::Corrected => {
                if ws.needs_judgment() {
                    return Err(SessionError::guard(
                        Guard::JudgmentUnresolved,
                        format!("resolve the assessor judgment for {story_id} before confirming"),
                    ));
                }
                if status == ValidationStatus::Corrected && ws.corrections.is_empty() {
                    return Err(SessionError::guard(
                        Guard::NoCorrections,
                        "no correction was recorded for this finding",
                    ));
                }
            }
            ValidationStatus::Disputed => {
                let parked = self.parking.items().iter().any(|i: &ParkingItem| {
                    i.tag == ParkingTag::Interpretation
                        && i.raised_during.phase == Phase::FindingValidation
                        && i.raised_during.story_id.as_deref() == Some(story_id)
                });
                if !parked {
                    return Err(SessionError::guard(
                        Guard::DisputeNotParked,
                        "a disputed interpretation must be put on the parking lot",
                    ));
                }
            }
        }
        let finding = self
            .workspace_mut(story_id)
            .finding
            .as_mut()
            .expect("validation started");
        finding.validation = Some(status);
        if let Some(text) = note {
            finding.misinformation_note = (!text.trim().is_empty()).then(|| text.to_string());
        }
        self.phase = Phase::ContinueDecision;
        Ok(())
    }

    fn on_area_skipped(
        &mut self,
        area_id: &str,
        reason: &str,
        disposition: SkipDisposition,
    ) -> Result<(), SessionError> {
        self.expect_phase(&[Phase::ContinueDecision], "area_skipped")?;
        if area_id != self.current_area_id() {
            return Err(SessionError::guard(
                Guard::WrongTarget,
                format!("current area is {}, not {area_id}", self.current_area_id()),
            ));
        }
        Self::require_text(reason, "skip reason")?;
        let remaining: Vec<String> =
            self.area_stories[self.cursor.area][self.cursor.story + 1..].to_vec();
        for id in &remaining {
            self.workspace_mut(id).skipped = true;
        }
        self.skips.insert(
            area_id.to_string(),
            AreaSkip {
                reason: reason.to_string(),
                disposition,
            },
        );
        if self.is_last_area() {
            self.cursor.story = self.area_stories[self.cursor.area].len() - 1;
            self.phase = Phase::ParkingReview;
        } else {
            self.cursor = Cursor {
                area: self.cursor.area + 1,
                story: 0,
            };
            self.phase = Phase::AreaIntro;
        }
        Ok(())
    }

    /// Vote table rows in catalog order: one per story with a revealed
    /// definitive round, plus not-rated rows for skipped stories.
    pub fn vote_table(&self) -> Vec<VoteTableRow> {
        self.catalog
            .process_areas
            .iter()
            .flat_map(|area| area.stories().map(move |s| (area, s)))
            .filter_map(|(area, story)| {
                let ws = &self.workspaces[&story.id];
                let distribution = ws.definitive;
                if distribution.is_none() && !ws.skipped {
                    return None;
                }
                Some(VoteTableRow {
                    area_id: area.id.clone(),
                    story_id: story.id.clone(),
                    model_ref: story.model_ref.clone(),
                    distribution,
                })
            })
            .collect()
    }

    /// Serializable view of the state for queries and recovery checks.
    pub fn snapshot(&self) -> SessionSnapshot {
        let rounds = self
            .rounds
            .rounds()
            .map(|r| RoundSnapshot {
                round_id: r.id,
                story_id: r.story_id.clone(),
                kind: r.kind,
                state: r.state,
                cast_count: r.cast_count(),
                expected: r.expected(),
                distribution: r.distribution(),
            })
            .collect();
        let stories = self
            .catalog
            .stories()
            .map(|(_, _, s)| (s.id.clone(), self.workspaces[&s.id].clone()))
            .map(|(story_id, workspace)| StorySnapshot {
                rating: workspace.rating(),
                story_id,
                workspace,
            })
            .collect();
        let in_area = self.phase != Phase::Welcome;
        SessionSnapshot {
            session_id: self.id.clone(),
            last_seq: self.last_seq,
            phase: self.phase,
            area_id: in_area.then(|| self.current_area_id().to_string()),
            story_id: self.phase.has_story().then(|| self.current_story_id().to_string()),
            floor: self.floor_holder(),
            speaking_order: self.speaking_order().map(<[Seat]>::to_vec),
            active_seats: self.active_seats(),
            practitioner_count: self.practitioner_count(),
            presenter_rounds: self.presenter_rounds,
            rounds,
            stories,
            vote_table: self.vote_table(),
            parking_lot: self.parking.items().to_vec(),
            skipped_areas: self.skips.clone(),
            warnings: self.warnings.clone(),
            external_inputs: self.external_inputs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTableRow {
    pub area_id: String,
    pub story_id: String,
    pub model_ref: String,
    /// `None` marks a not-rated row.
    pub distribution: Option<VoteDistribution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSnapshot {
    pub round_id: RoundId,
    pub story_id: String,
    pub kind: RoundKind,
    pub state: RoundState,
    pub cast_count: u32,
    pub expected: u32,
    pub distribution: Option<VoteDistribution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySnapshot {
    pub story_id: String,
    pub rating: Option<PracticeRating>,
    #[serde(flatten)]
    pub workspace: StoryWorkspace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub last_seq: u64,
    pub phase: Phase,
    pub area_id: Option<String>,
    pub story_id: Option<String>,
    pub floor: Option<Seat>,
    pub speaking_order: Option<Vec<Seat>>,
    pub active_seats: Vec<Seat>,
    pub practitioner_count: u32,
    pub presenter_rounds: u32,
    pub rounds: Vec<RoundSnapshot>,
    pub stories: Vec<StorySnapshot>,
    pub vote_table: Vec<VoteTableRow>,
    pub parking_lot: Vec<ParkingItem>,
    pub skipped_areas: BTreeMap<String, AreaSkip>,
    pub warnings: Vec<String>,
    pub external_inputs: Option<String>,
}
