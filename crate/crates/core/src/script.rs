//! Drives a [`LiveSession`] through whole stories with scripted votes.
//! Used to produce fixtures and demo journals and to exercise the state
//! machine end to end.

use crate::rating::{Answer, ImplementationLevel, PracticeTable};
use crate::session::events::ValidationStatus;
use crate::session::live::{Command, CommandError, LiveSession, ParticipantSpec, Role};
use crate::voting::VoteCard;

pub const ASSESSOR: &str = "assessor";

pub fn practitioner_id(seat: u32) -> String {
    format!("p{seat}")
}

/// An assessor plus `n` practitioners `p0..p{n-1}`.
pub fn participants(n: u32) -> Vec<ParticipantSpec> {
    let mut out = vec![ParticipantSpec {
        participant_id: ASSESSOR.to_string(),
        role: Role::Assessor,
    }];
    out.extend((0..n).map(|i| ParticipantSpec {
        participant_id: practitioner_id(i),
        role: Role::Practitioner,
    }));
    out
}

/// A practice table with every required entry filled.
pub fn complete_table(note: &str) -> PracticeTable {
    let yes = |n: &str| {
        Some(Answer {
            answer: true,
            note: n.to_string(),
        })
    };
    PracticeTable {
        alternate_practice: None,
        relevant: yes(note),
        efficient: yes(""),
        institutionalized: yes(""),
        documented: Some(Answer {
            answer: false,
            note: String::new(),
        }),
        strengths_weaknesses: Some(note.to_string()),
        implementation_blockers: Some("none".into()),
        traceable_problems: Some("none".into()),
        additional_comments: Some("none".into()),
    }
}

#[derive(Debug, Clone)]
pub struct StoryScript {
    /// One card per active seat, in seat order.
    pub preliminary: Vec<VoteCard>,
    pub definitive: Vec<VoteCard>,
    pub table: PracticeTable,
    pub judgment: Option<(ImplementationLevel, String)>,
    pub noteworthy: bool,
    /// Explanations before an early exit; `None` lets everybody speak.
    pub explanations: Option<usize>,
    pub outcome: ValidationStatus,
    pub corrections: Vec<crate::session::live::CorrectionInput>,
    pub dispute: Option<String>,
}

impl StoryScript {
    /// Same cards in both rounds, complete table, confirmed finding.
    pub fn votes(cards: &[VoteCard]) -> Self {
        StoryScript {
            preliminary: cards.to_vec(),
            definitive: cards.to_vec(),
            table: complete_table("practice observed"),
            judgment: None,
            noteworthy: false,
            explanations: None,
            outcome: ValidationStatus::Confirmed,
            corrections: Vec::new(),
            dispute: None,
        }
    }
}

fn assessor(live: &mut LiveSession, command: Command) -> Result<(), CommandError> {
    live.execute(ASSESSOR, command, None).map(|_| ())
}

/// Casts one card per active seat, in seat order.
pub fn cast_all(live: &mut LiveSession, cards: &[VoteCard]) -> Result<(), CommandError> {
    let seats = live.session().active_seats();
    assert_eq!(seats.len(), cards.len(), "one card per active seat");
    for (seat, card) in seats.into_iter().zip(cards) {
        let id = practitioner_id(seat.0);
        live.execute(
            &id,
            Command::CastVote {
                ballot_token: None,
                card: *card,
            },
            None,
        )?;
    }
    Ok(())
}

/// Runs one presented story through validation, ending in
/// `ContinueDecision`.
pub fn run_story(live: &mut LiveSession, script: &StoryScript) -> Result<(), CommandError> {
    assessor(live, Command::OpenClarification {})?;
    assessor(live, Command::OpenPreliminaryVote {})?;
    cast_all(live, &script.preliminary)?;
    assessor(live, Command::Reveal {})?;
    assessor(
        live,
        Command::SelectPresenter {
            participant_id: None,
            dissenting: false,
        },
    )?;
    let speakers = live.session().speaking_order().map_or(0, <[_]>::len);
    let talks = script.explanations.unwrap_or(speakers).min(speakers);
    for i in 0..talks {
        let seat = live.session().floor_holder().expect("floor held");
        live.execute(
            &practitioner_id(seat.0),
            Command::RecordExplanation {
                note: format!("explanation {}", i + 1),
            },
            None,
        )?;
    }
    assessor(
        live,
        Command::EndExplanations {
            early_exit: talks < speakers,
        },
    )?;
    assessor(
        live,
        Command::UpdatePracticeTable {
            patch: script.table.clone(),
        },
    )?;
    assessor(
        live,
        Command::OpenDefinitiveVote {
            incomplete_override: !script.table.is_complete(),
        },
    )?;
    cast_all(live, &script.definitive)?;
    assessor(live, Command::Reveal {})?;
    assessor(live, Command::RecordVote {})?;
    assessor(live, Command::BeginValidation {})?;
    if let Some((rating, rationale)) = &script.judgment {
        assessor(
            live,
            Command::ResolveJudgment {
                story_id: None,
                rating: *rating,
                rationale: rationale.clone(),
            },
        )?;
    }
    if script.noteworthy {
        assessor(
            live,
            Command::SetNoteworthy {
                story_id: None,
                noteworthy: true,
            },
        )?;
    }
    assessor(
        live,
        Command::ValidateFinding {
            outcome: script.outcome,
            corrections: script.corrections.clone(),
            dispute_text: script.dispute.clone(),
            misinformation_note: None,
        },
    )
}

/// Starts the first area and presents its first story.
pub fn begin(live: &mut LiveSession) -> Result<(), CommandError> {
    assessor(live, Command::StartArea { area_id: None })?;
    assessor(live, Command::PresentStory { story_id: None })
}

/// From `ContinueDecision`: next story, or next area and its first story.
/// Returns false when the parking lot review was reached instead.
pub fn advance(live: &mut LiveSession) -> Result<bool, CommandError> {
    use crate::session::Phase;
    assessor(live, Command::Continue {})?;
    match live.session().phase() {
        Phase::AreaIntro => {
            assessor(live, Command::PresentStory { story_id: None })?;
            Ok(true)
        }
        Phase::StoryPresented => Ok(true),
        _ => Ok(false),
    }
}

/// From `ParkingReview`: resolves every unsettled item, then closes.
pub fn finish(live: &mut LiveSession) -> Result<(), CommandError> {
    use crate::session::parking::ParkingStatus;
    let unsettled: Vec<u32> = live
        .session()
        .parking()
        .items()
        .iter()
        .filter(|i| !i.status.is_terminal())
        .map(|i| i.item_id)
        .collect();
    for item_id in unsettled {
        assessor(
            live,
            Command::CloseParkingItem {
                item_id,
                status: ParkingStatus::Resolved,
                consensus_reached: None,
                evidence_note: None,
            },
        )?;
    }
    assessor(live, Command::OpenParkingClosure {})?;
    assessor(live, Command::CloseSession {})
}

/// One step of a random walk over a live session: the participant to act
/// and the command to issue. With probability `chaos` the command is drawn
/// from every command kind with arbitrary arguments; otherwise it is one
/// that usually moves the interview forward. Used by fuzz tests.
pub fn random_step<R: rand::Rng + ?Sized>(
    live: &LiveSession,
    rng: &mut R,
    chaos: f64,
) -> (String, Command) {
    if rng.random_bool(chaos) {
        arbitrary_step(live, rng)
    } else {
        forward_step(live, rng)
    }
}

fn random_seat<R: rand::Rng + ?Sized>(live: &LiveSession, rng: &mut R) -> u32 {
    rng.random_range(0..live.session().practitioner_count())
}

fn random_card<R: rand::Rng + ?Sized>(rng: &mut R) -> VoteCard {
    VoteCard::ALL[rng.random_range(0..VoteCard::ALL.len())]
}

fn random_level<R: rand::Rng + ?Sized>(rng: &mut R) -> ImplementationLevel {
    use ImplementationLevel::*;
    [Fully, Largely, Partially, Not][rng.random_range(0..4)]
}

fn forward_step<R: rand::Rng + ?Sized>(live: &LiveSession, rng: &mut R) -> (String, Command) {
    use crate::rating::SkipDisposition;
    use crate::session::parking::ParkingStatus;
    use crate::session::Phase::*;
    let s = live.session();
    let a = |c: Command| (ASSESSOR.to_string(), c);
    match s.phase() {
        Welcome => a(Command::StartArea { area_id: None }),
        AreaIntro => a(Command::PresentStory { story_id: None }),
        StoryPresented => a(Command::OpenClarification {}),
        Clarification => a(Command::OpenPreliminaryVote {}),
        PreliminaryVoting | DefinitiveVoting => {
            let outstanding = s.open_round().map_or(0, |r| r.outstanding());
            if outstanding == 0 || rng.random_bool(0.1) {
                a(Command::Reveal {})
            } else {
                let seats = s.active_seats();
                let seat = seats[rng.random_range(0..seats.len())];
                (
                    practitioner_id(seat.0),
                    Command::CastVote {
                        ballot_token: None,
                        card: random_card(rng),
                    },
                )
            }
        }
        PreliminaryRevealed => a(Command::SelectPresenter {
            participant_id: None,
            dissenting: rng.random_bool(0.3),
        }),
        Explaining => match s.floor_holder() {
            Some(seat) if rng.random_bool(0.8) => (
                practitioner_id(seat.0),
                Command::RecordExplanation {
                    note: "we do it this way".into(),
                },
            ),
            _ => a(Command::EndExplanations { early_exit: true }),
        },
        FollowOn => {
            let table_done = s
                .workspace(s.current_story_id())
                .is_some_and(|w| w.practice_table.is_complete());
            if !table_done && rng.random_bool(0.7) {
                a(Command::UpdatePracticeTable {
                    patch: complete_table("seen in two projects"),
                })
            } else {
                a(Command::OpenDefinitiveVote {
                    incomplete_override: !table_done,
                })
            }
        }
        DefinitiveRevealed => a(Command::RecordVote {}),
        VoteRecorded => a(Command::BeginValidation {}),
        FindingValidation => {
            if s.unresolved_judgments().is_empty() {
                a(Command::ValidateFinding {
                    outcome: ValidationStatus::Confirmed,
                    corrections: Vec::new(),
                    dispute_text: None,
                    misinformation_note: None,
                })
            } else {
                a(Command::ResolveJudgment {
                    story_id: None,
                    rating: random_level(rng),
                    rationale: "weighed the explanations".into(),
                })
            }
        }
        ContinueDecision => {
            if rng.random_bool(0.05) {
                a(Command::SkipProcessArea {
                    reason: "out of time".into(),
                    disposition: SkipDisposition::NotRated,
                })
            } else {
                a(Command::Continue {})
            }
        }
        ParkingReview => match s.parking().items().iter().find(|i| !i.status.is_terminal()) {
            Some(item) => a(Command::CloseParkingItem {
                item_id: item.item_id,
                status: ParkingStatus::Resolved,
                consensus_reached: None,
                evidence_note: None,
            }),
            None => a(Command::OpenParkingClosure {}),
        },
        ParkingClosure => a(Command::CloseSession {}),
        Closed => a(Command::RoundStatus {}),
    }
}

fn arbitrary_step<R: rand::Rng + ?Sized>(live: &LiveSession, rng: &mut R) -> (String, Command) {
    use crate::rating::SkipDisposition;
    use crate::session::parking::{ParkingStatus, ParkingTag};
    let s = live.session();
    let seat = random_seat(live, rng);
    let pick_story = |rng: &mut R| -> Option<String> {
        let ids: Vec<&str> = s.catalog().stories().map(|(_, _, st)| st.id.as_str()).collect();
        rng.random_bool(0.5)
            .then(|| ids[rng.random_range(0..ids.len())].to_string())
    };
    let item_id = rng.random_range(1..=3);
    let command = match rng.random_range(0..28) {
        0 => Command::StartArea { area_id: None },
        1 => Command::PresentStory {
            story_id: pick_story(rng),
        },
        2 => Command::OpenClarification {},
        3 => Command::OpenPreliminaryVote {},
        4 => Command::RequestBallot {},
        5 => Command::CastVote {
            ballot_token: None,
            card: random_card(rng),
        },
        6 => Command::RoundStatus {},
        7 => Command::Reveal {},
        8 => Command::SelectPresenter {
            participant_id: rng.random_bool(0.5).then(|| practitioner_id(seat)),
            dissenting: rng.random_bool(0.5),
        },
        9 => Command::RecordExplanation {
            note: "out of turn".into(),
        },
        10 => Command::EndExplanations {
            early_exit: rng.random_bool(0.5),
        },
        11 => Command::UpdatePracticeTable {
            patch: PracticeTable {
                strengths_weaknesses: Some("partial".into()),
                ..PracticeTable::default()
            },
        },
        12 => Command::OpenDefinitiveVote {
            incomplete_override: rng.random_bool(0.5),
        },
        13 => Command::RecordVote {},
        14 => Command::BeginValidation {},
        15 => Command::ResolveJudgment {
            story_id: pick_story(rng),
            rating: random_level(rng),
            rationale: if rng.random_bool(0.8) { "reason".into() } else { String::new() },
        },
        16 => {
            let outcome = [
                ValidationStatus::Confirmed,
                ValidationStatus::Corrected,
                ValidationStatus::Disputed,
            ][rng.random_range(0..3)];
            Command::ValidateFinding {
                outcome,
                corrections: Vec::new(),
                dispute_text: (outcome == ValidationStatus::Disputed && rng.random_bool(0.7))
                    .then(|| "is a wiki page evidence?".into()),
                misinformation_note: None,
            }
        }
        17 => Command::SetNoteworthy {
            story_id: pick_story(rng),
            noteworthy: rng.random_bool(0.5),
        },
        18 => Command::Continue {},
        19 => Command::SkipProcessArea {
            reason: "skip".into(),
            disposition: if rng.random_bool(0.5) {
                SkipDisposition::NotRated
            } else {
                SkipDisposition::Unsatisfied
            },
        },
        20 => Command::AddParkingItem {
            text: "come back to this".into(),
            tag: [None, Some(ParkingTag::General), Some(ParkingTag::GoDeeper)][rng.random_range(0..3)],
        },
        21 => Command::AssignParkingItem {
            item_id,
            owner: practitioner_id(seat),
            evidence_note: None,
        },
        22 => Command::OpenParkingClosure {},
        23 => Command::CloseParkingItem {
            item_id,
            status: [
                ParkingStatus::Resolved,
                ParkingStatus::AgreedToDisagree,
                ParkingStatus::AssessorDecided,
                ParkingStatus::Open,
            ][rng.random_range(0..4)],
            consensus_reached: None,
            evidence_note: None,
        },
        24 => Command::CloseSession {},
        25 => Command::DeactivateParticipant {
            participant_id: practitioner_id(seat),
        },
        26 => Command::ReactivateParticipant {
            participant_id: practitioner_id(seat),
        },
        _ => Command::SetExternalInputs {
            text: "interview notes".into(),
        },
    };
    let actor = if rng.random_bool(0.5) {
        ASSESSOR.to_string()
    } else {
        practitioner_id(random_seat(live, rng))
    };
    (actor, command)
}
