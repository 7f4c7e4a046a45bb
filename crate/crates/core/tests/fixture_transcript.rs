//! The shipped interview transcript is generated by driving a live session;
//! this test keeps the two in sync. Set `NGI_REGENERATE_FIXTURES=1` to
//! rewrite the file after an intentional change.

use std::path::PathBuf;

use ngi_core::catalog::load_catalog;
use ngi_core::journal::{parse_events, replay};
use ngi_core::rating::{ImplementationLevel, PracticeTable};
use ngi_core::report::{render_all, render_journal, to_json};
use ngi_core::script::{self, practitioner_id, StoryScript, ASSESSOR};
use ngi_core::session::events::{EventKind, ValidationStatus};
use ngi_core::session::live::{Command, CorrectionInput, LiveOptions, LiveSession};
use ngi_core::session::parking::{ParkingStatus, ParkingTag};
use ngi_core::session::{Phase, SessionConfig};
use ngi_core::rating::SkipDisposition;
use ngi_core::voting::VoteCard::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn assessor(live: &mut LiveSession, command: Command) {
    live.execute(ASSESSOR, command, None).unwrap();
}

fn interview() -> LiveSession {
    let catalog =
        load_catalog(&std::fs::read_to_string(fixture("interview_catalog.json")).unwrap()).unwrap();
    let (mut live, _) = LiveSession::create(
        "fixture-interview",
        catalog,
        &script::participants(5),
        SessionConfig::default(),
        LiveOptions::deterministic(7),
    )
    .unwrap();
    assessor(
        &mut live,
        Command::SetExternalInputs {
            text: "Management interview notes are kept in a separate document.".into(),
        },
    );
    script::begin(&mut live).unwrap();
    live.execute(
        &practitioner_id(2),
        Command::AddParkingItem {
            text: "Who owns the definition of done?".into(),
            tag: None,
        },
        None,
    )
    .unwrap();

    let mut strong = StoryScript::votes(&[Always, Always, Always, MostOfTheTime, MostOfTheTime]);
    strong.noteworthy = true;
    script::run_story(&mut live, &strong).unwrap();
    assert!(script::advance(&mut live).unwrap());

    let mut contested = StoryScript::votes(&[Always, Always, Always, Seldom, Never]);
    contested.preliminary = vec![Always, Always, MostOfTheTime, MostOfTheTime, Always];
    contested.definitive = vec![Always, Always, Seldom, Never, DontKnow];
    contested.judgment = Some((
        ImplementationLevel::Largely,
        "History is kept in the tracker but not consulted consistently".into(),
    ));
    script::run_story(&mut live, &contested).unwrap();
    assert!(script::advance(&mut live).unwrap());

    let mut weak = StoryScript::votes(&[Seldom, Seldom, Seldom, MostOfTheTime, DontKnow]);
    weak.table.implementation_blockers = Some("Reviews are skipped when an iteration runs late".into());
    weak.explanations = Some(3);
    script::run_story(&mut live, &weak).unwrap();
    assessor(
        &mut live,
        Command::AddParkingItem {
            text: "Do review checklists exist for every project?".into(),
            tag: Some(ParkingTag::GoDeeper),
        },
    );
    assert!(script::advance(&mut live).unwrap());

    let mut corrected = StoryScript::votes(&[Always, Always, Always, DontKnow, DontKnow]);
    corrected.outcome = ValidationStatus::Corrected;
    corrected.corrections = vec![CorrectionInput {
        patch: PracticeTable {
            additional_comments: Some("Estimates are revisited at every planning meeting".into()),
            ..PracticeTable::default()
        },
        note: "Estimates are revisited every iteration, not only per release".into(),
    }];
    script::run_story(&mut live, &corrected).unwrap();
    assessor(
        &mut live,
        Command::SkipProcessArea {
            reason: "Out of time; release planning to be covered with management".into(),
            disposition: SkipDisposition::NotRated,
        },
    );
    assert_eq!(live.session().phase(), Phase::ParkingReview);

    assessor(
        &mut live,
        Command::CloseParkingItem {
            item_id: 1,
            status: ParkingStatus::Resolved,
            consensus_reached: None,
            evidence_note: Some("The product owner accepts stories as done".into()),
        },
    );
    assessor(
        &mut live,
        Command::AssignParkingItem {
            item_id: 2,
            owner: practitioner_id(3),
            evidence_note: Some("Bring the checklists of the last two projects".into()),
        },
    );
    assessor(&mut live, Command::OpenParkingClosure {});
    assessor(
        &mut live,
        Command::CloseParkingItem {
            item_id: 2,
            status: ParkingStatus::AgreedToDisagree,
            consensus_reached: None,
            evidence_note: None,
        },
    );
    assessor(&mut live, Command::CloseSession {});
    live
}

#[test]
fn shipped_transcript_matches_generator() {
    let live = interview();
    let text = to_json(&live.journal());
    let path = fixture("interview_transcript.json");
    if std::env::var_os("NGI_REGENERATE_FIXTURES").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let shipped = std::fs::read_to_string(&path).expect("fixture present");
    assert!(
        shipped == text,
        "fixture out of date; rerun with NGI_REGENERATE_FIXTURES=1"
    );
}

#[test]
fn transcript_has_the_documented_shape() {
    let events =
        parse_events(&std::fs::read_to_string(fixture("interview_transcript.json")).unwrap())
            .unwrap();
    let session = replay(&events).unwrap();
    assert_eq!(session.phase(), Phase::Closed);
    assert_eq!(session.catalog().process_areas.len(), 2);
    assert_eq!(session.catalog().story_count(), 5);
    assert_eq!(session.practitioner_count(), 5);
    let count = |f: &dyn Fn(&EventKind) -> bool| events.iter().filter(|e| f(&e.kind)).count();
    assert_eq!(count(&|k| matches!(k, EventKind::AreaSkipped { .. })), 1);
    assert_eq!(count(&|k| matches!(k, EventKind::JudgmentResolved { .. })), 1);
    assert_eq!(
        count(&|k| matches!(
            k,
            EventKind::ParkingItemClosed {
                status: ParkingStatus::AgreedToDisagree,
                ..
            }
        )),
        1
    );
}

#[test]
fn live_session_and_replay_render_identically() {
    let live = interview();
    let from_live = render_all(live.session(), false).unwrap();
    let from_journal = render_journal(live.journal(), false).unwrap();
    assert_eq!(from_live, from_journal);
}
