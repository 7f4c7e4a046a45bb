//! Journal event schema. Every state change of a session is one of these.
//!
//! Fields marked "derived" are filled in by the live session and may be left
//! out of hand-written transcripts; replay recomputes them and rejects the
//! event if a supplied value disagrees.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::rating::{ImplementationLevel, PracticeRating, PracticeTable, SkipDisposition};
use crate::session::parking::{ParkingStatus, ParkingTag, RaisedDuring};
use crate::session::SessionConfig;
use crate::voting::{BallotToken, RoundId, RoundKind, VoteCard, VoteDistribution};
use crate::Seat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEvent {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated(SessionCreated),
    RosterWarning {
        practitioner_count: u32,
        recommended_min: u32,
        recommended_max: u32,
    },
    AreaStarted {
        area_id: String,
    },
    StoryPresented {
        story_id: String,
    },
    ClarificationOpened {
        story_id: String,
        timebox_seconds: u32,
    },
    RoundOpened {
        round_id: RoundId,
        story_id: String,
        round_kind: RoundKind,
        ballot_tokens: Vec<BallotToken>,
        /// Definitive rounds only: opened although the practice table is
        /// incomplete.
        #[serde(default, skip_serializing_if = "is_false")]
        incomplete_override: bool,
    },
    BallotCast {
        round_id: RoundId,
        ballot_token: BallotToken,
        card: VoteCard,
    },
    RoundRevealed {
        round_id: RoundId,
        /// Derived.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distribution: Option<VoteDistribution>,
    },
    PresenterSelected {
        round_id: RoundId,
        seat: Seat,
        policy: PresenterPolicyUsed,
    },
    ExplanationRecorded {
        story_id: String,
        /// Position in this round's speaking order, from 0.
        position: u32,
        note: String,
    },
    ExplanationsEnded {
        early_exit: bool,
    },
    PracticeTableUpdated {
        story_id: String,
        patch: PracticeTable,
    },
    VoteRecorded {
        story_id: String,
    },
    ValidationStarted {
        story_id: String,
        /// Derived.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rating: Option<PracticeRating>,
        /// Derived.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        misinformation_note: Option<String>,
    },
    JudgmentResolved {
        story_id: String,
        rating: ImplementationLevel,
        rationale: String,
    },
    FindingCorrected {
        story_id: String,
        patch: PracticeTable,
        note: String,
    },
    FindingValidated {
        story_id: String,
        status: ValidationStatus,
        /// Replaces the drafted note; an empty string clears it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        misinformation_note: Option<String>,
    },
    NoteworthySet {
        story_id: String,
        noteworthy: bool,
    },
    AreaSkipped {
        area_id: String,
        reason: String,
        disposition: SkipDisposition,
    },
    ParkingReviewStarted {},
    ParkingItemAdded {
        item_id: u32,
        text: String,
        tag: ParkingTag,
        /// Derived.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        raised_during: Option<RaisedDuring>,
    },
    ParkingItemAssigned {
        item_id: u32,
        owner_seat: Seat,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evidence_note: Option<String>,
    },
    ParkingItemClosed {
        item_id: u32,
        status: ParkingStatus,
        consensus_reached: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evidence_note: Option<String>,
    },
    ParkingClosureStarted {},
    SessionClosed {},
    ParticipantDeactivated {
        seat: Seat,
    },
    ParticipantReactivated {
        seat: Seat,
    },
    ExternalInputsSet {
        text: String,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub catalog: Catalog,
    /// Number of practitioner seats. Names and identities are never journaled.
    pub practitioner_count: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inactive_seats: Vec<Seat>,
    #[serde(default)]
    pub config: SessionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenterPolicyUsed {
    Rotate,
    Manual,
    Dissenting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Confirmed,
    Corrected,
    Disputed,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionCreated(_) => "session_created",
            EventKind::RosterWarning { .. } => "roster_warning",
            EventKind::AreaStarted { .. } => "area_started",
            EventKind::StoryPresented { .. } => "story_presented",
            EventKind::ClarificationOpened { .. } => "clarification_opened",
            EventKind::RoundOpened { .. } => "round_opened",
            EventKind::BallotCast { .. } => "ballot_cast",
            EventKind::RoundRevealed { .. } => "round_revealed",
            EventKind::PresenterSelected { .. } => "presenter_selected",
            EventKind::ExplanationRecorded { .. } => "explanation_recorded",
            EventKind::ExplanationsEnded { .. } => "explanations_ended",
            EventKind::PracticeTableUpdated { .. } => "practice_table_updated",
            EventKind::VoteRecorded { .. } => "vote_recorded",
            EventKind::ValidationStarted { .. } => "validation_started",
            EventKind::JudgmentResolved { .. } => "judgment_resolved",
            EventKind::FindingCorrected { .. } => "finding_corrected",
            EventKind::FindingValidated { .. } => "finding_validated",
            EventKind::NoteworthySet { .. } => "noteworthy_set",
            EventKind::AreaSkipped { .. } => "area_skipped",
            EventKind::ParkingReviewStarted {} => "parking_review_started",
            EventKind::ParkingItemAdded { .. } => "parking_item_added",
            EventKind::ParkingItemAssigned { .. } => "parking_item_assigned",
            EventKind::ParkingItemClosed { .. } => "parking_item_closed",
            EventKind::ParkingClosureStarted {} => "parking_closure_started",
            EventKind::SessionClosed {} => "session_closed",
            EventKind::ParticipantDeactivated { .. } => "participant_deactivated",
            EventKind::ParticipantReactivated { .. } => "participant_reactivated",
            EventKind::ExternalInputsSet { .. } => "external_inputs_set",
        }
    }
}
