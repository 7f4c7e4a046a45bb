//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

use ngi_core::catalog::{self, render_story, Catalog, ProcessArea, SpecificGoal, StoryCard};
use ngi_core::journal::{parse_events, replay, to_jsonl};
use ngi_core::projection::{project_from, project_snapshot};
use ngi_core::rating::{classify_votes, classify_with_rule, PracticeRating, Rule};
use ngi_core::report::{render_all, render_journal};
use ngi_core::script::{self, random_step, StoryScript, ASSESSOR};
use ngi_core::session::events::{EventKind, JournalEvent, PresenterPolicyUsed};
use ngi_core::session::live::{Actor, Command, CommandError, LiveOptions, LiveSession, Role};
use ngi_core::session::parking::ParkingStatus;
use ngi_core::session::{Phase, Session, SessionConfig, SessionError, PHASE_EDGES};
use ngi_core::voting::{RoundState, Viewer, VoteCard, VoteDistribution};
use ngi_service::store::{
    credential_digest, FileStore, MemoryStore, SessionRecord, Store, StoredParticipant,
};
use ngi_service::{router, AppState};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    }};
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("rating oracle equivalence", rating_oracle_equivalence),
        ("rating named scenarios", rating_named_scenarios),
        ("reveal safety", reveal_safety_and_conformance),
        ("state machine conformance", state_machine_conformance),
        ("rotation fairness", rotation_fairness),
        ("replay determinism", replay_determinism),
        ("sample catalog fidelity", sample_catalog_fidelity),
        ("crash recovery", crash_recovery),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let text = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {text}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1}s)"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn fixture_journal() -> Vec<JournalEvent> {
    parse_events(&std::fs::read_to_string(fixture("interview_transcript.json")).unwrap()).unwrap()
}

// Rating rules

/// Every multiset of `total` cards as counts per card.
fn multisets(total: u32) -> Vec<[u32; 5]> {
    let mut out = Vec::new();
    for a in 0..=total {
        for b in 0..=total - a {
            for c in 0..=total - a - b {
                for d in 0..=total - a - b - c {
                    out.push([a, b, c, d, total - a - b - c - d]);
                }
            }
        }
    }
    out
}

/// Rule predicates evaluated on the expanded vote list, in table order.
fn oracle_matches(votes: &[VoteCard]) -> [bool; 5] {
    use VoteCard::*;
    let n = votes.len();
    let count = |f: &dyn Fn(VoteCard) -> bool| votes.iter().filter(|&&c| f(c)).count();
    let positive = count(&|c| c == Always || c == MostOfTheTime);
    let negative = count(&|c| c == Seldom || c == Never);
    let dont_know = count(&|c| c == DontKnow);
    let mixed = count(&|c| c == Seldom || c == MostOfTheTime || c == DontKnow);
    [
        positive == n,
        negative == n,
        positive * 2 > n && positive + dont_know == n,
        mixed * 2 > n,
        true,
    ]
}

fn oracle_rating(votes: &[VoteCard]) -> (usize, PracticeRating) {
    let first = oracle_matches(votes).iter().position(|&m| m).unwrap();
    let rating = [
        PracticeRating::FullyImplemented,
        PracticeRating::NotImplemented,
        PracticeRating::LargelyImplemented,
        PracticeRating::PartiallyImplemented,
        PracticeRating::NeedsJudgment,
    ][first];
    (first, rating)
}

fn rule_index(rule: Rule) -> usize {
    match rule {
        Rule::R1 => 0,
        Rule::R2 => 1,
        Rule::R3 => 2,
        Rule::R4 => 3,
        Rule::R5 => 4,
    }
}

fn rating_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut cases = 0;
    let mut overlapping = 0;
    for total in 1..=9 {
        for counts in multisets(total) {
            cases += 1;
            let votes: Vec<VoteCard> = VoteCard::ALL
                .iter()
                .zip(counts)
                .flat_map(|(&c, k)| std::iter::repeat_n(c, k as usize))
                .collect();
            let d = VoteDistribution::from_counts(&VoteCard::ALL.map(|c| (c, 0)).map(|(c, _)| {
                (c, votes.iter().filter(|&&v| v == c).count() as u32)
            }));
            let (expected_rule, expected) = oracle_rating(&votes);
            let rule = classify_with_rule(&d).map_err(|e| format!("{counts:?}: {e}"))?;
            let rating = classify_votes(&d).map_err(|e| format!("{counts:?}: {e}"))?;
            ensure!(
                rule_index(rule) == expected_rule && rating == expected,
                "{counts:?}: got {rule:?}/{rating:?}, oracle R{}/{expected:?}",
                expected_rule + 1
            );
            ensure!(rule.rating() == rating, "{counts:?}: rule and rating disagree");
            if oracle_matches(&votes)[..4].iter().filter(|&&m| m).count() > 1 {
                overlapping += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(cases == 2001, "enumerated {cases} cases, expected 2001");
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!(
        "{cases} distributions agree, one rule each ({overlapping} settled by rule order), {:.0} ms",
        elapsed.as_secs_f64() * 1000.0
    ))
}

fn rating_named_scenarios() -> Outcome {
    use PracticeRating::*;
    use VoteCard::*;
    let rows: [(PracticeRating, Vec<Vec<VoteCard>>); 5] = [
        (
            FullyImplemented,
            vec![
                vec![Always; 4],
                vec![Always, MostOfTheTime, MostOfTheTime],
                vec![MostOfTheTime; 7],
            ],
        ),
        (
            NotImplemented,
            vec![vec![Never, Never, Seldom], vec![Seldom; 4], vec![Never]],
        ),
        (
            LargelyImplemented,
            vec![
                vec![Always, Always, DontKnow],
                vec![Always, MostOfTheTime, MostOfTheTime, DontKnow, DontKnow],
                vec![MostOfTheTime, MostOfTheTime, MostOfTheTime, MostOfTheTime, DontKnow, DontKnow, DontKnow],
            ],
        ),
        (
            PartiallyImplemented,
            vec![
                vec![Seldom, MostOfTheTime, DontKnow],
                vec![MostOfTheTime, MostOfTheTime, Seldom, Never],
                vec![Always, Seldom, Seldom, DontKnow, Never],
            ],
        ),
        (
            NeedsJudgment,
            vec![
                vec![Always, Never],
                vec![Always, Always, Never, Never],
                vec![Always, Seldom, Never],
            ],
        ),
    ];
    let mut checked = 0;
    for (expected, scenarios) in rows {
        ensure!(scenarios.len() >= 3, "{expected:?} has fewer than 3 scenarios");
        for votes in scenarios {
            let got = classify_votes(&VoteDistribution::from_cards(votes.iter().copied()))
                .map_err(|e| e.to_string())?;
            ensure!(got == expected, "{votes:?}: got {got:?}, expected {expected:?}");
            checked += 1;
        }
    }
    Ok(format!("{checked} scenarios across 5 rows"))
}

// Random sessions

/// At least 10,000 random sessions; `NGI_WALKS` may ask for more.
fn sessions() -> u64 {
    let requested = std::env::var("NGI_WALKS").ok().and_then(|v| v.parse().ok());
    requested.unwrap_or(0).max(10_000)
}

const IDENTITY_KEYS: [&str; 8] = [
    "seat",
    "participant_id",
    "owner_seat",
    "owner",
    "floor",
    "next_floor",
    "speaking_order",
    "you",
];
const VOTE_KEYS: [&str; 4] = ["card", "cards", "vote", "votes"];
const SECRET_KEYS: [&str; 3] = ["card", "ballot_token", "ballot_tokens"];

fn vote_words() -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    for c in VoteCard::ALL {
        words.insert(serde_json::to_value(c).unwrap().as_str().unwrap().to_string());
        words.insert(serde_json::to_value(c.agreement()).unwrap().as_str().unwrap().to_string());
    }
    words
}

/// No object may carry an identity next to a vote value.
fn check_unpaired(value: &Value, words: &BTreeSet<String>, what: &str) -> Result<(), String> {
    match value {
        Value::Object(m) => {
            let identity = m.keys().any(|k| IDENTITY_KEYS.contains(&k.as_str()));
            let vote = m.iter().any(|(k, v)| {
                VOTE_KEYS.contains(&k.as_str())
                    || words.contains(k)
                    || v.as_str().is_some_and(|s| words.contains(s))
            });
            ensure!(!(identity && vote), "{what}: identity paired with a vote in {value}");
            m.values().try_for_each(|v| check_unpaired(v, words, what))
        }
        Value::Array(items) => items.iter().try_for_each(|v| check_unpaired(v, words, what)),
        _ => Ok(()),
    }
}

/// Client-facing values never carry ballot tokens or individual cards.
fn check_no_secrets(value: &Value, what: &str) -> Result<(), String> {
    match value {
        Value::Object(m) => {
            if let Some(k) = m.keys().find(|k| SECRET_KEYS.contains(&k.as_str())) {
                return Err(format!("{what}: carries {k}"));
            }
            m.values().try_for_each(|v| check_no_secrets(v, what))
        }
        Value::Array(items) => items.iter().try_for_each(|v| check_no_secrets(v, what)),
        _ => Ok(()),
    }
}

fn check_client(value: &Value, words: &BTreeSet<String>, what: &str) -> Result<(), String> {
    check_no_secrets(value, what)?;
    check_unpaired(value, words, what)
}

/// Independent of the session's own bookkeeping: at every reveal the round
/// has exactly one cast per issued token and nothing else.
fn check_reveals(events: &[JournalEvent]) -> Result<usize, String> {
    let mut issued: HashMap<u32, BTreeSet<String>> = HashMap::new();
    let mut cast: HashMap<u32, BTreeSet<String>> = HashMap::new();
    let mut revealed = BTreeSet::new();
    for e in events {
        match &e.kind {
            EventKind::RoundOpened {
                round_id,
                ballot_tokens,
                ..
            } => {
                let tokens: BTreeSet<String> = ballot_tokens.iter().map(|t| t.0.clone()).collect();
                ensure!(tokens.len() == ballot_tokens.len(), "event {}: duplicate tokens", e.seq);
                issued.insert(round_id.0, tokens);
            }
            EventKind::BallotCast {
                round_id,
                ballot_token,
                ..
            } => {
                ensure!(!revealed.contains(&round_id.0), "event {}: cast after reveal", e.seq);
                let known = issued.get(&round_id.0).is_some_and(|t| t.contains(&ballot_token.0));
                ensure!(known, "event {}: cast with a token never issued", e.seq);
                cast.entry(round_id.0).or_default().insert(ballot_token.0.clone());
            }
            EventKind::RoundRevealed { round_id, .. } => {
                let opened = issued.get(&round_id.0).map_or(0, BTreeSet::len);
                let used = cast.get(&round_id.0).map_or(0, BTreeSet::len);
                ensure!(
                    opened == used,
                    "event {}: reveal with {} of {opened} ballots cast",
                    e.seq,
                    used
                );
                revealed.insert(round_id.0);
            }
            _ => {}
        }
    }
    Ok(revealed.len())
}

#[derive(Default)]
struct WalkStats {
    sessions: u64,
    commands: u64,
    rejected: u64,
    reveals: usize,
    closed: u64,
    edges: BTreeSet<(Phase, Phase)>,
    codes: BTreeMap<String, u64>,
    failures: Vec<String>,
}

impl WalkStats {
    fn merge(&mut self, other: WalkStats) {
        self.sessions += other.sessions;
        self.commands += other.commands;
        self.rejected += other.rejected;
        self.reveals += other.reveals;
        self.closed += other.closed;
        self.edges.extend(other.edges);
        for (k, v) in other.codes {
            *self.codes.entry(k).or_default() += v;
        }
        self.failures.extend(other.failures);
    }
}

fn is_named_code(code: &str) -> bool {
    let named = |part: &str| !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c == '_');
    match code.split_once(':') {
        Some((a, b)) => named(a) && named(b),
        None => named(code),
    }
}

fn walk_session(seed: u64, words: &BTreeSet<String>, stats: &mut WalkStats) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let practitioners = rng.random_range(1..=9u32);
    let steps = rng.random_range(20..=400usize);
    let chaos = rng.random_range(0.0..0.5);
    let (mut live, _) = LiveSession::create(
        &format!("walk-{seed}"),
        catalog::sample(),
        &script::participants(practitioners),
        SessionConfig::default(),
        LiveOptions::deterministic(seed),
    )
    .map_err(|e| e.to_string())?;
    let viewers = [
        (Actor::Assessor, "assessor"),
        (Actor::Practitioner(ngi_core::Seat(0)), "practitioner"),
    ];
    for step in 0..steps {
        let (who, command) = random_step(&live, &mut rng, chaos);
        let draws_ballot = matches!(command, Command::RequestBallot {});
        let before_len = live.journal().len();
        let before = live.session().snapshot();
        stats.commands += 1;
        match live.execute(&who, command, None) {
            Ok(out) => {
                ensure!(
                    live.journal().len() == before_len + out.events.len(),
                    "step {step}: journal grew by a different amount than reported"
                );
                let mut reply = serde_json::to_value(&out.reply).unwrap();
                if draws_ballot {
                    // The drawn token goes to its holder and nowhere else.
                    let detail = reply["detail"].as_object_mut().unwrap();
                    let keys: BTreeSet<&str> = detail.keys().map(String::as_str).collect();
                    ensure!(
                        keys == BTreeSet::from(["round_id", "ballot_token"]),
                        "step {step}: ballot reply carries {keys:?}"
                    );
                    detail.remove("ballot_token");
                }
                check_client(&reply, words, &format!("step {step} reply"))?;
            }
            Err(e) => {
                stats.rejected += 1;
                ensure!(live.journal().len() == before_len, "step {step}: rejected command appended");
                ensure!(
                    live.session().snapshot() == before,
                    "step {step}: rejected command changed state"
                );
                let code = e.code();
                ensure!(is_named_code(&code), "step {step}: unnamed rejection {code:?}: {e}");
                if let CommandError::Session(SessionError::Guard { guard, .. }) = &e {
                    ensure!(code == format!("guard:{}", guard.name()), "step {step}: guard code {code}");
                }
                *stats.codes.entry(code).or_default() += 1;
            }
        }
        for (actor, name) in viewers {
            if let Some(status) = live.round_status(actor) {
                let v = serde_json::to_value(status).unwrap();
                check_client(&v, words, &format!("step {step} {name} round status"))?;
            }
        }
        if step % 25 == 0 {
            for (actor, name) in viewers {
                let snap = project_snapshot(&live.session().snapshot(), actor.viewer());
                check_client(&snap, words, &format!("step {step} {name} snapshot"))?;
            }
        }
    }

    let events = live.journal();
    stats.reveals += check_reveals(events)?;
    for (actor, name) in viewers {
        for p in project_from(events, actor.viewer(), 0) {
            let v = serde_json::to_value(&p).unwrap();
            check_client(&v, words, &format!("{name} stream event {}", p.seq))?;
        }
        let snap = project_snapshot(&live.session().snapshot(), actor.viewer());
        check_client(&snap, words, &format!("final {name} snapshot"))?;
    }
    for line in to_jsonl(events).lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        check_unpaired(&v, words, "journal export")?;
    }
    if let Ok(rendered) = render_all(live.session(), true) {
        for (name, text) in rendered.iter().filter(|(n, _)| n.ends_with(".json")) {
            let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            check_client(&v, words, name)?;
        }
    }

    let mut session = replay(&events[..1]).map_err(|e| e.to_string())?;
    for e in &events[1..] {
        let from = session.phase();
        session.apply(e).map_err(|err| format!("replay event {}: {err}", e.seq))?;
        let to = session.phase();
        if from != to || matches!(e.kind, EventKind::ExplanationRecorded { .. }) {
            ensure!(
                PHASE_EDGES.contains(&(from, to)),
                "event {}: {from} -> {to} via {} is not a declared edge",
                e.seq,
                e.kind.name()
            );
            stats.edges.insert((from, to));
        }
    }
    ensure!(session.snapshot() == live.session().snapshot(), "replayed state differs");
    if session.phase() == Phase::Closed {
        stats.closed += 1;
    }
    stats.sessions += 1;
    Ok(())
}

fn run_walks() -> &'static WalkStats {
    static STATS: std::sync::OnceLock<WalkStats> = std::sync::OnceLock::new();
    STATS.get_or_init(|| {
        let words = vote_words();
        let threads = std::thread::available_parallelism().map_or(4, |n| n.get()) as u64;
        let mut total = WalkStats::default();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let words = &words;
                    scope.spawn(move || {
                        let mut stats = WalkStats::default();
                        for seed in (t..sessions()).step_by(threads as usize) {
                            let outcome = catch_unwind(AssertUnwindSafe(|| {
                                walk_session(seed, words, &mut stats)
                            }))
                            .unwrap_or_else(|_| Err("panicked".into()));
                            if let Err(e) = outcome {
                                stats.failures.push(format!("seed {seed}: {e}"));
                            }
                        }
                        stats
                    })
                })
                .collect();
            for h in handles {
                total.merge(h.join().unwrap());
            }
        });
        total
    })
}

fn walk_failures(stats: &WalkStats) -> Outcome {
    ensure!(
        stats.failures.is_empty(),
        "{} of {} sessions failed; first: {}",
        stats.failures.len(),
        sessions(),
        stats.failures[0]
    );
    ensure!(stats.sessions == sessions(), "only {} sessions ran", stats.sessions);
    Ok(String::new())
}

fn reveal_safety_and_conformance() -> Outcome {
    let stats = run_walks();
    walk_failures(stats)?;
    Ok(format!(
        "{} sessions, {} commands, {} reveals all complete, no identity paired with a vote in replies, streams, snapshots, round status or exports",
        stats.sessions, stats.commands, stats.reveals
    ))
}

fn state_machine_conformance() -> Outcome {
    let stats = run_walks();
    walk_failures(stats)?;
    let declared: BTreeSet<(Phase, Phase)> = PHASE_EDGES.iter().copied().collect();
    let missing: Vec<_> = declared.difference(&stats.edges).collect();
    ensure!(missing.is_empty(), "declared edges never exercised: {missing:?}");
    ensure!(stats.rejected > 0, "no command was ever rejected");
    let guards = stats.codes.keys().filter(|c| c.starts_with("guard:")).count();
    Ok(format!(
        "{} of {} commands rejected with {} distinct named codes ({guards} guards), all {} declared edges taken, nothing else, {} sessions closed",
        stats.rejected,
        stats.commands,
        stats.codes.len(),
        declared.len(),
        stats.closed
    ))
}

// Presenter rotation

fn long_catalog(stories: usize) -> Catalog {
    Catalog {
        title: "Rotation".into(),
        version: "1".into(),
        process_areas: vec![ProcessArea {
            id: "ROT".into(),
            name: "Rotation".into(),
            intent: "exercise presenter rotation".into(),
            goals: vec![SpecificGoal {
                id: "SG1".into(),
                statement: "goal".into(),
                stories: (1..=stories)
                    .map(|i| StoryCard {
                        id: format!("ROT-1.{i}"),
                        model_ref: format!("SP 1.{i}"),
                        level: 2,
                        cmmi_text: "practice".into(),
                        role: "team member".into(),
                        pronoun: "I".into(),
                        practice_instance: format!("do thing {i}"),
                        benefit: "it helps".into(),
                        article: None,
                        connector: None,
                    })
                    .collect(),
            }],
        }],
    }
}

fn rotation_fairness() -> Outcome {
    const ROUNDS: usize = 50;
    let mut checked = 0;
    for p in 2..=9u32 {
        let (mut live, _) = LiveSession::create(
            &format!("rotation-{p}"),
            long_catalog(ROUNDS),
            &script::participants(p),
            SessionConfig::default(),
            LiveOptions::deterministic(u64::from(p)),
        )
        .map_err(|e| e.to_string())?;
        script::begin(&mut live).map_err(|e| e.to_string())?;
        let mut story = StoryScript::votes(&vec![VoteCard::Always; p as usize]);
        story.explanations = Some(0);
        for r in 0..ROUNDS {
            script::run_story(&mut live, &story).map_err(|e| format!("P={p} story {r}: {e}"))?;
            let more = script::advance(&mut live).map_err(|e| e.to_string())?;
            ensure!(more == (r + 1 < ROUNDS), "P={p}: catalog ended early");
        }
        let starters: Vec<u32> = live
            .journal()
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::PresenterSelected { seat, policy, .. } => {
                    Some((seat.0, *policy == PresenterPolicyUsed::Rotate))
                }
                _ => None,
            })
            .map(|(seat, rotate)| rotate.then_some(seat).ok_or(format!("P={p}: non-default policy")))
            .collect::<Result<_, _>>()?;
        ensure!(starters.len() == ROUNDS, "P={p}: {} presenter choices", starters.len());
        for r in 1..=ROUNDS {
            let mut counts = vec![0usize; p as usize];
            for &s in &starters[..r] {
                counts[s as usize] += 1;
            }
            let (lo, hi) = (r / p as usize, r.div_ceil(p as usize));
            ensure!(
                counts.iter().all(|&c| c == lo || c == hi),
                "P={p} R={r}: starter counts {counts:?} outside {{{lo}, {hi}}}"
            );
            checked += 1;
        }
    }
    Ok(format!("{checked} (P, R) pairs within floor/ceil bounds"))
}

// Replay

const OUTPUTS: [&str; 6] = [
    "findings.json",
    "findings.md",
    "vote_table.json",
    "vote_table.md",
    "practice_tables.json",
    "practice_tables.md",
];

fn credentials_for(participants: u32) -> Vec<(String, Role, Option<u32>, String)> {
    script::participants(participants)
        .into_iter()
        .map(|p| {
            let seat = (p.role == Role::Practitioner)
                .then(|| p.participant_id.trim_start_matches('p').parse().unwrap());
            let credential = format!("credential-{}", p.participant_id);
            (p.participant_id, p.role, seat, credential)
        })
        .collect()
}

struct Client {
    app: Router,
    rt: tokio::runtime::Runtime,
}

impl Client {
    fn new(app: Router) -> Client {
        Client {
            app,
            rt: tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap(),
        }
    }

    fn send(&self, req: Request<Body>) -> (StatusCode, String) {
        self.rt.block_on(async {
            let res = self.app.clone().oneshot(req).await.unwrap();
            let status = res.status();
            let bytes = res.into_body().collect().await.unwrap().to_bytes();
            (status, String::from_utf8(bytes.to_vec()).unwrap())
        })
    }

    fn get(&self, uri: &str) -> (StatusCode, String) {
        self.send(Request::get(uri).body(Body::empty()).unwrap())
    }

    fn post(&self, uri: &str, body: &Value) -> (StatusCode, String) {
        self.send(
            Request::post(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
    }
}

fn replay_determinism() -> Outcome {
    // Fixture shape.
    let events = fixture_journal();
    let session = replay(&events).map_err(|e| e.to_string())?;
    let count = |f: &dyn Fn(&EventKind) -> bool| events.iter().filter(|e| f(&e.kind)).count();
    ensure!(session.phase() == Phase::Closed, "fixture is not closed");
    ensure!(session.catalog().process_areas.len() == 2, "fixture needs 2 areas");
    ensure!(session.catalog().story_count() == 5, "fixture needs 5 stories");
    ensure!(session.practitioner_count() == 5, "fixture needs 5 practitioners");
    ensure!(count(&|k| matches!(k, EventKind::AreaSkipped { .. })) == 1, "one skip expected");
    ensure!(
        count(&|k| matches!(k, EventKind::JudgmentResolved { .. })) == 1,
        "one judgment expected"
    );
    ensure!(
        count(&|k| matches!(
            k,
            EventKind::ParkingItemClosed {
                status: ParkingStatus::AgreedToDisagree,
                ..
            }
        )) == 1,
        "one agree-to-disagree item expected"
    );

    // Two replays through the command-line entry point.
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        ngi_cli::replay(&fixture("interview_transcript.json"), &dir.path().join(run), false)
            .map_err(|e| e.to_string())?;
    }
    for f in OUTPUTS {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        ensure!(a == b, "{f} differs between replays");
    }

    // Live in-memory sessions replay to the same documents.
    let mut live_checked = 0;
    for seed in 0..20 {
        let mut rng = StdRng::seed_from_u64(seed);
        let (mut live, _) = LiveSession::create(
            &format!("live-{seed}"),
            catalog::sample(),
            &script::participants(2 + (seed as u32 % 8)),
            SessionConfig::default(),
            LiveOptions::deterministic(seed),
        )
        .map_err(|e| e.to_string())?;
        for _ in 0..5_000 {
            if live.session().phase() == Phase::Closed {
                break;
            }
            let (who, command) = random_step(&live, &mut rng, 0.0);
            let _ = live.execute(&who, command, None);
        }
        ensure!(live.session().phase() == Phase::Closed, "seed {seed}: walk did not close");
        let captured = parse_events(&to_jsonl(live.journal())).map_err(|e| e.to_string())?;
        let from_live = render_all(live.session(), false).map_err(|e| e.to_string())?;
        let from_journal = render_journal(&captured, false).map_err(|e| e.to_string())?;
        ensure!(from_live == from_journal, "seed {seed}: replayed documents differ");
        live_checked += 1;
    }

    // A session hosted by the service, driven over HTTP.
    let client = Client::new(router(
        AppState::open(Arc::new(MemoryStore::default()), SessionConfig::default())
            .map_err(|e| e.to_string())?,
    ));
    let roster: Vec<Value> = script::participants(4)
        .iter()
        .map(|p| serde_json::to_value(p).unwrap())
        .collect();
    let catalog: Value = serde_json::from_str(catalog::sample_source()).unwrap();
    let (status, body) = client.post("/sessions", &json!({"catalog": catalog, "roster": roster}));
    ensure!(status == StatusCode::CREATED, "create: {status} {body}");
    let created: Value = serde_json::from_str(&body).unwrap();
    let id = created["session_id"].as_str().unwrap().to_string();
    let credentials: HashMap<String, String> = created["credentials"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["participant_id"].as_str().unwrap().to_string(),
                c["credential"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    // A local twin picks plausible commands; the service must agree on
    // which of them succeed.
    let (mut twin, _) = LiveSession::create(
        "twin",
        catalog::sample(),
        &script::participants(4),
        SessionConfig::default(),
        LiveOptions::deterministic(99),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(99);
    for step in 0..5_000 {
        if twin.session().phase() == Phase::Closed {
            break;
        }
        let (who, command) = random_step(&twin, &mut rng, 0.0);
        let envelope = json!({"credential": credentials[&who], "command": command});
        let (status, body) = client.post(&format!("/sessions/{id}/commands"), &envelope);
        let local = twin.execute(&who, command, None);
        ensure!(
            local.is_ok() == (status == StatusCode::OK),
            "step {step}: service said {status} {body}, twin said {local:?}"
        );
    }
    ensure!(twin.session().phase() == Phase::Closed, "hosted walk did not close");
    let assessor = &credentials[ASSESSOR];
    let (status, journal) =
        client.get(&format!("/sessions/{id}/export/journal?format=jsonl&credential={assessor}"));
    ensure!(status == StatusCode::OK, "journal export: {status} {journal}");
    let replayed =
        render_journal(&parse_events(&journal).map_err(|e| e.to_string())?, false).map_err(|e| e.to_string())?;
    for (artifact, format) in [
        ("findings", "json"),
        ("findings", "md"),
        ("vote_table", "json"),
        ("practice_tables", "md"),
    ] {
        let (status, body) = client.get(&format!(
            "/sessions/{id}/export/{artifact}?format={format}&credential={assessor}"
        ));
        ensure!(status == StatusCode::OK, "{artifact}.{format}: {status}");
        ensure!(
            replayed[format!("{artifact}.{format}").as_str()] == body,
            "hosted {artifact}.{format} differs from its replayed journal"
        );
    }
    Ok(format!(
        "fixture replays byte-identically; {live_checked} live sessions and one hosted session replay to identical documents"
    ))
}

// Sample catalog

fn sample_catalog_fidelity() -> Outcome {
    let expected = [
        ("REQM-1.3", "As a team member I can find how user stories have evolved over time as well as their current status so I can better understand stakeholders’ needs and avert “he said, she said” situations"),
        ("PP-1.2", "As a team we establish estimates for user stories and tasks so that we can make commitments to our stakeholders and plan our work"),
        ("PMC-1.1", "As a team we track rate of work completion using iteration and release burn down charts so that we can keep all stakeholders abreast of our progress"),
        ("MA-2.3", "As an organization we preserve our defect and velocity data so it can be used by other projects to check their initial estimates against what has been achieved and to find organizational quality issues and bottlenecks"),
        ("RSKM-1.1", "As a team we have at our disposal a list of risks sources that can help us identify what might go wrong in a project and decide what to do about it"),
        ("RSKM-2.1", "As a team we make a conscious effort to identify and document potential problems so we don’t overlook them"),
        ("TS-1.1", "As a team we discuss the characteristics a good software solution should possess and evaluate different solutions against them to avoid following a dead end path"),
        ("VER-2.2", "As developers we review each other code with the purpose of identifying bugs and non-compliances with our coding guidelines"),
        ("VAL-1.2", "As a team we use a canary release strategy to get fast feedback from actual users"),
    ];
    let text = std::fs::read_to_string(fixture("sample_catalog.json")).unwrap();
    let loaded = catalog::load_catalog(&text).map_err(|e| e.to_string())?;
    ensure!(loaded == catalog::sample(), "shipped file and built-in sample differ");
    let ids: Vec<&str> = loaded.stories().map(|(_, _, s)| s.id.as_str()).collect();
    let expected_ids: Vec<&str> = expected.iter().map(|(id, _)| *id).collect();
    ensure!(ids == expected_ids, "story order {ids:?}");
    for (_, _, story) in loaded.stories() {
        let want = expected.iter().find(|(id, _)| *id == story.id).unwrap().1;
        let got = render_story(story);
        ensure!(got == want, "{}: rendered\n  {got}\nexpected\n  {want}", story.id);
    }
    Ok(format!("{} stories render exactly", expected.len()))
}

// Crash recovery

fn viewer_state(session: &Session, pid: &str, role: Role, seat: Option<u32>) -> Value {
    let viewer = if role == Role::Assessor {
        Viewer::Assessor
    } else {
        Viewer::Practitioner
    };
    let round_status = session.current_round().map(|r| {
        let mut v = json!({
            "round_id": r.id,
            "story_id": r.story_id,
            "kind": r.kind,
            "state": r.state,
            "cast_count": r.cast_count(),
            "expected": r.expected(),
        });
        if role == Role::Assessor && r.state == RoundState::Open {
            // Who cast is not in the journal: known only while nobody has.
            let known = (r.cast_count() == 0).then_some(false);
            v["has_cast"] = session
                .active_seats()
                .iter()
                .map(|s| json!({"seat": s.0, "has_cast": known}))
                .collect();
        }
        if let Some(d) = r.distribution() {
            v["distribution"] = serde_json::to_value(d).unwrap();
        }
        v
    });
    json!({
        "you": {"participant_id": pid, "role": role, "seat": seat},
        "story_text": session.phase().has_story().then(|| render_story(session.current_story())),
        "round_status": round_status,
        "snapshot": project_snapshot(&session.snapshot(), viewer),
    })
}

fn crash_recovery() -> Outcome {
    let events = fixture_journal();
    let session_id = replay(&events[..1]).map_err(|e| e.to_string())?.snapshot().session_id;
    let people = credentials_for(5);
    let record = SessionRecord {
        session_id: session_id.clone(),
        participants: people
            .iter()
            .map(|(pid, role, _, credential)| StoredParticipant {
                participant_id: pid.clone(),
                role: *role,
                credential_sha256: credential_digest(credential),
            })
            .collect(),
    };
    let observers: Vec<_> = people.iter().filter(|p| p.0 == ASSESSOR || p.0 == "p1").collect();

    let mut session = replay(&events[..1]).map_err(|e| e.to_string())?;
    let mut queries = 0;
    for k in 1..=events.len() {
        if k > 1 {
            session.apply(&events[k - 1]).map_err(|e| e.to_string())?;
        }
        let prefix = &events[..k];
        // Half of the next line models a write cut short by the crash.
        for torn in [false, true] {
            if torn && k == events.len() {
                continue;
            }
            let dir = tempfile::tempdir().unwrap();
            let store = FileStore::open(dir.path()).map_err(|e| e.to_string())?;
            store.create(&record, prefix).map_err(|e| e.to_string())?;
            if torn {
                let next = serde_json::to_string(&events[k]).unwrap();
                let path = dir.path().join(&session_id).join("journal.jsonl");
                let mut bytes = std::fs::read(&path).unwrap();
                bytes.extend_from_slice(&next.as_bytes()[..next.len() / 2]);
                std::fs::write(&path, bytes).unwrap();
            }
            let state = AppState::open(Arc::new(store), SessionConfig::default())
                .map_err(|e| format!("prefix {k}: restart failed: {e}"))?;
            let client = Client::new(router(state));
            for (pid, role, seat, credential) in &observers {
                let (status, body) =
                    client.get(&format!("/sessions/{session_id}/state?credential={credential}"));
                ensure!(status == StatusCode::OK, "prefix {k} {pid}: {status} {body}");
                let got: Value = serde_json::from_str(&body).unwrap();
                let want = viewer_state(&session, pid, *role, *seat);
                ensure!(got == want, "prefix {k} (torn {torn}) {pid}: state\n{got}\nexpected\n{want}");
                queries += 1;
            }
            let assessor = &observers[0].3;
            let rendered = render_all(&session, true);
            for artifact in ["findings", "vote_table", "practice_tables"] {
                for ext in ["json", "md"] {
                    let (status, body) = client.get(&format!(
                        "/sessions/{session_id}/export/{artifact}?format={ext}&draft=true&credential={assessor}"
                    ));
                    match &rendered {
                        Ok(docs) => {
                            ensure!(status == StatusCode::OK, "prefix {k} {artifact}.{ext}: {status} {body}");
                            ensure!(
                                docs[format!("{artifact}.{ext}").as_str()] == body,
                                "prefix {k} {artifact}.{ext} differs"
                            );
                        }
                        Err(_) => ensure!(
                            status == StatusCode::CONFLICT,
                            "prefix {k} {artifact}.{ext}: expected 409, got {status}"
                        ),
                    }
                    queries += 1;
                }
            }
            let (status, body) = client.get(&format!(
                "/sessions/{session_id}/export/journal?format=jsonl&credential={assessor}"
            ));
            if session.open_round().is_some() {
                ensure!(status == StatusCode::CONFLICT, "prefix {k}: journal exported mid-round");
            } else {
                ensure!(status == StatusCode::OK, "prefix {k}: journal {status}");
                ensure!(body == to_jsonl(prefix), "prefix {k}: journal differs");
            }
            queries += 1;
        }
    }
    Ok(format!(
        "{} prefixes, clean and torn, {queries} queries match the state before the crash",
        events.len()
    ))
}
