use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use ngi_core::catalog;
use ngi_core::script::complete_table;
use ngi_core::session::live::SteppingClock;
use ngi_core::session::SessionConfig;
use ngi_service::store::{FileStore, MemoryStore, Store};
use ngi_service::{router, AppState};

struct Harness {
    app: Router,
}

struct Created {
    id: String,
    assessor: String,
    practitioners: Vec<String>,
}

fn one_story_catalog() -> Value {
    let mut c: Value = serde_json::from_str(catalog::sample_source()).unwrap();
    let areas = c["process_areas"].as_array_mut().unwrap();
    areas.truncate(1);
    c
}

impl Harness {
    fn with_store(store: Arc<dyn Store>) -> Harness {
        let state = AppState::open_with_clock(
            store,
            SessionConfig::default(),
            Arc::new(SteppingClock::fixed()),
        )
        .unwrap();
        Harness { app: router(state) }
    }

    fn new() -> Harness {
        Self::with_store(Arc::new(MemoryStore::default()))
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, Value) {
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let value = serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        let req = Request::post(uri)
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        self.send(req).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn create(&self, catalog: Value, practitioners: usize) -> Created {
        let mut roster = vec![json!({"participant_id": "lead", "role": "assessor"})];
        for i in 0..practitioners {
            roster.push(json!({"participant_id": format!("dev{i}"), "role": "practitioner"}));
        }
        let (status, body) = self
            .post("/sessions", json!({"catalog": catalog, "roster": roster}))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let creds = body["credentials"].as_array().unwrap();
        assert_eq!(creds.len(), practitioners + 1);
        Created {
            id: body["session_id"].as_str().unwrap().to_string(),
            assessor: creds[0]["credential"].as_str().unwrap().to_string(),
            practitioners: creds[1..]
                .iter()
                .map(|c| c["credential"].as_str().unwrap().to_string())
                .collect(),
        }
    }

    async fn cmd(
        &self,
        s: &Created,
        credential: &str,
        key: Option<&str>,
        kind: &str,
        payload: Value,
    ) -> (StatusCode, Value) {
        self.post(
            &format!("/sessions/{}/commands", s.id),
            json!({
                "credential": credential,
                "idempotency_key": key,
                "command": {"kind": kind, "payload": payload},
            }),
        )
        .await
    }

    async fn ok(&self, s: &Created, kind: &str, payload: Value) -> Value {
        let (status, body) = self.cmd(s, &s.assessor, None, kind, payload).await;
        assert_eq!(status, StatusCode::OK, "{kind}: {body}");
        body
    }

    async fn cast_all(&self, s: &Created, cards: &[&str]) {
        for (cred, card) in s.practitioners.iter().zip(cards) {
            let (status, body) = self.cmd(s, cred, None, "cast_vote", json!({"card": card})).await;
            assert_eq!(status, StatusCode::OK, "{body}");
        }
    }

    async fn state(&self, s: &Created, credential: &str) -> Value {
        let (status, body) = self
            .get(&format!("/sessions/{}/state?credential={credential}", s.id))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body
    }

    async fn to_preliminary_vote(&self, s: &Created) {
        self.ok(s, "start_area", json!({})).await;
        self.ok(s, "present_story", json!({})).await;
        self.ok(s, "open_clarification", json!({})).await;
        self.ok(s, "open_preliminary_vote", json!({})).await;
    }

    /// Runs the one-story catalog to `closed`.
    async fn run_to_close(&self, s: &Created) {
        self.to_preliminary_vote(s).await;
        self.cast_all(s, &["always", "always", "dont_know"]).await;
        self.ok(s, "reveal", json!({})).await;
        self.ok(s, "select_presenter", json!({})).await;
        self.ok(s, "end_explanations", json!({"early_exit": true})).await;
        let table = serde_json::to_value(complete_table("reviewed weekly")).unwrap();
        self.ok(s, "update_practice_table", json!({"patch": table})).await;
        self.ok(s, "open_definitive_vote", json!({})).await;
        self.cast_all(s, &["always", "most_of_the_time", "dont_know"]).await;
        self.ok(s, "reveal", json!({})).await;
        self.ok(s, "record_vote", json!({})).await;
        self.ok(s, "begin_validation", json!({})).await;
        self.ok(s, "validate_finding", json!({"outcome": "confirmed"})).await;
        self.ok(s, "continue", json!({})).await;
        self.ok(s, "open_parking_closure", json!({})).await;
        self.ok(s, "close_session", json!({})).await;
    }

    async fn stream(&self, s: &Created, query: &str, last_event_id: Option<&str>) -> Vec<Value> {
        let mut req = Request::get(format!("/sessions/{}/events?{query}", s.id));
        if let Some(id) = last_event_id {
            req = req.header("last-event-id", id);
        }
        let res = self.app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
        assert_eq!(res.status(), StatusCode::OK);
        let bytes = tokio::time::timeout(Duration::from_secs(5), res.into_body().collect())
            .await
            .expect("stream of a closed session ends")
            .unwrap()
            .to_bytes();
        parse_sse(std::str::from_utf8(&bytes).unwrap())
    }
}

fn parse_sse(text: &str) -> Vec<Value> {
    text.split("\n\n")
        .filter_map(|frame| {
            let data: String = frame
                .lines()
                .filter_map(|l| l.strip_prefix("data: ").or_else(|| l.strip_prefix("data:")))
                .collect();
            (!data.is_empty()).then(|| serde_json::from_str(&data).unwrap())
        })
        .collect()
}

#[tokio::test]
async fn healthz_reports_ok() {
    let h = Harness::new();
    let (status, body) = h.get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn invalid_catalog_lists_every_violation() {
    let h = Harness::new();
    let mut c: Value = serde_json::from_str(catalog::sample_source()).unwrap();
    let first = c["process_areas"][0]["id"].clone();
    c["process_areas"][1]["id"] = first;
    c["process_areas"][2]["goals"][0]["stories"][0]["role"] = json!(" ");
    let roster = json!([
        {"participant_id": "a", "role": "assessor"},
        {"participant_id": "p", "role": "practitioner"},
    ]);
    let (status, body) = h.post("/sessions", json!({"catalog": c, "roster": roster})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_catalog");
    let violations = body["error"]["violations"].as_array().unwrap();
    assert!(violations.len() >= 2, "{violations:?}");
    let paths: Vec<&str> = violations.iter().map(|v| v["path"].as_str().unwrap()).collect();
    assert!(paths.iter().any(|p| p.contains("process_areas[2]")), "{paths:?}");
}

#[tokio::test]
async fn roster_without_assessor_is_rejected() {
    let h = Harness::new();
    let roster = json!([{"participant_id": "p", "role": "practitioner"}]);
    let (status, body) = h
        .post("/sessions", json!({"catalog": one_story_catalog(), "roster": roster}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_roster");
}

#[tokio::test]
async fn small_rosters_get_a_warning() {
    let h = Harness::new();
    let roster = json!([
        {"participant_id": "a", "role": "assessor"},
        {"participant_id": "p", "role": "practitioner"},
    ]);
    let (status, body) = h
        .post("/sessions", json!({"catalog": one_story_catalog(), "roster": roster}))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["warnings"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn credentials_are_unique_and_checked() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    let mut all = s.practitioners.clone();
    all.push(s.assessor.clone());
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 4);
    let (status, body) = h.cmd(&s, "forged", None, "start_area", json!({})).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"]["code"], "invalid_credential");
    let (status, _) = h.get(&format!("/sessions/nope/state?credential={}", s.assessor)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.get(&format!("/sessions/{}/state", s.id)).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn practitioner_cannot_advance() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    let (status, body) = h.cmd(&s, &s.practitioners[0], None, "continue", json!({})).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["error"]["code"], "unauthorized");
}

#[tokio::test]
async fn cast_during_clarification_is_a_phase_error() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.ok(&s, "start_area", json!({})).await;
    h.ok(&s, "present_story", json!({})).await;
    h.ok(&s, "open_clarification", json!({})).await;
    let (status, body) = h
        .cmd(&s, &s.practitioners[0], None, "cast_vote", json!({"card": "always"}))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "illegal_transition");
    assert!(body["error"]["message"].as_str().unwrap().contains("clarification"), "{body}");
}

#[tokio::test]
async fn reveal_guard_is_surfaced_verbatim() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.to_preliminary_vote(&s).await;
    h.cast_all(&s, &["always", "never"]).await;
    let (status, body) = h.cmd(&s, &s.assessor, None, "reveal", json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "guard:votes_outstanding");
    assert!(body["error"]["message"].as_str().unwrap().contains("1 vote outstanding"));
}

#[tokio::test]
async fn resent_reveal_returns_the_same_response() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.to_preliminary_vote(&s).await;
    h.cast_all(&s, &["always", "always", "seldom"]).await;
    let first = h.cmd(&s, &s.assessor, Some("reveal-1"), "reveal", json!({})).await;
    let seq = h.state(&s, &s.assessor).await["snapshot"]["last_seq"].clone();
    let again = h.cmd(&s, &s.assessor, Some("reveal-1"), "reveal", json!({})).await;
    assert_eq!(first, again);
    assert_eq!(first.0, StatusCode::OK);
    assert_eq!(h.state(&s, &s.assessor).await["snapshot"]["last_seq"], seq);
}

#[tokio::test]
async fn idempotency_keys_are_per_participant() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.to_preliminary_vote(&s).await;
    for cred in &s.practitioners {
        let (status, body) = h
            .cmd(&s, cred, Some("my-vote"), "cast_vote", json!({"card": "always"}))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let status = h.state(&s, &s.assessor).await;
    assert_eq!(status["round_status"]["cast_count"], 3);
}

#[tokio::test]
async fn practitioners_see_counts_not_seats() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.to_preliminary_vote(&s).await;
    h.cast_all(&s, &["always"]).await;
    let mine = h.state(&s, &s.practitioners[1]).await;
    assert_eq!(mine["round_status"]["cast_count"], 1);
    assert_eq!(mine["round_status"]["expected"], 3);
    assert!(mine["round_status"].get("has_cast").is_none_or(Value::is_null));
    assert_eq!(mine["you"]["seat"], 1);
    let lead = h.state(&s, &s.assessor).await;
    let flags: Vec<bool> = lead["round_status"]["has_cast"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["has_cast"].as_bool().unwrap())
        .collect();
    assert_eq!(flags, vec![true, false, false]);
}

#[tokio::test]
async fn exports_are_for_the_assessor() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    let uri = |cred: &str, artifact: &str, format: &str| {
        format!("/sessions/{}/export/{artifact}?format={format}&credential={cred}", s.id)
    };
    let (status, body) = h.get(&uri(&s.practitioners[0], "findings", "json")).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["error"]["code"], "unauthorized");
    let (status, body) = h.get(&uri(&s.assessor, "findings", "md")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("DRAFT"));
    let (status, _) = h.get(&uri(&s.assessor, "findings", "json&draft=false")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = h.get(&uri(&s.assessor, "slides", "json")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    h.to_preliminary_vote(&s).await;
    let (status, body) = h.get(&uri(&s.assessor, "journal", "jsonl")).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["error"]["code"], "round_open");
}

#[tokio::test]
async fn closed_session_exports_match_offline_replay() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.run_to_close(&s).await;
    let (status, journal) = h
        .get(&format!(
            "/sessions/{}/export/journal?format=jsonl&credential={}",
            s.id, s.assessor
        ))
        .await;
    assert_eq!(status, StatusCode::OK);
    let events = ngi_core::journal::parse_events(journal.as_str().unwrap()).unwrap();
    let offline = ngi_core::report::render_journal(&events, false).unwrap();
    for (artifact, format, file) in [
        ("findings", "json", "findings.json"),
        ("findings", "md", "findings.md"),
        ("vote_table", "json", "vote_table.json"),
        ("practice_tables", "md", "practice_tables.md"),
    ] {
        let res = h
            .app
            .clone()
            .oneshot(
                Request::get(format!(
                    "/sessions/{}/export/{artifact}?format={format}&credential={}",
                    s.id, s.assessor
                ))
                .body(Body::empty())
                .unwrap(),
            )
            .await
            .unwrap();
        assert_eq!(res.status(), StatusCode::OK);
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        assert_eq!(std::str::from_utf8(&bytes).unwrap(), offline[file], "{file}");
    }
}

#[tokio::test]
async fn event_stream_is_role_filtered_and_resumable() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    h.run_to_close(&s).await;
    let events = h.stream(&s, &format!("credential={}", s.practitioners[0]), None).await;
    let seqs: Vec<u64> = events.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());
    for e in &events {
        assert!(e.get("ts").is_some() && e.get("kind").is_some() && e.get("payload").is_some());
        let text = e["payload"].to_string();
        assert!(!text.contains("ballot_token"), "{e}");
        match e["kind"].as_str().unwrap() {
            "ballot_cast" => {
                let keys: Vec<&str> = e["payload"].as_object().unwrap().keys().map(String::as_str).collect();
                assert_eq!(keys, vec!["cast_count", "expected", "round_id"]);
            }
            "practice_table_updated" => assert_eq!(e["payload"].as_object().unwrap().len(), 1),
            _ => {}
        }
    }
    let casts: Vec<u64> = events
        .iter()
        .filter(|e| e["kind"] == "ballot_cast")
        .map(|e| e["payload"]["cast_count"].as_u64().unwrap())
        .collect();
    assert_eq!(casts, vec![1, 2, 3, 1, 2, 3]);

    let lead = h.stream(&s, &format!("credential={}", s.assessor), None).await;
    let table = lead.iter().find(|e| e["kind"] == "practice_table_updated").unwrap();
    assert!(table["payload"].get("patch").is_some());

    let resumed = h.stream(&s, &format!("credential={}&from=10", s.practitioners[0]), None).await;
    assert_eq!(resumed[0]["seq"], 10);
    assert_eq!(resumed.len(), events.len() - 9);
    let by_header = h
        .stream(&s, &format!("credential={}", s.practitioners[0]), Some("9"))
        .await;
    assert_eq!(by_header, resumed);
}

#[tokio::test]
async fn live_subscribers_receive_new_events() {
    let h = Harness::new();
    let s = h.create(one_story_catalog(), 3).await;
    let req = Request::get(format!("/sessions/{}/events?credential={}", s.id, s.practitioners[2]))
        .body(Body::empty())
        .unwrap();
    let res = h.app.clone().oneshot(req).await.unwrap();
    let mut body = res.into_body();
    h.ok(&s, "start_area", json!({})).await;
    let mut seen = String::new();
    while !seen.contains("area_started") {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame())
            .await
            .expect("event arrives")
            .unwrap()
            .unwrap();
        if let Some(data) = frame.data_ref() {
            seen.push_str(std::str::from_utf8(data).unwrap());
        }
    }
    assert!(seen.contains("event: session_created"));
    assert!(seen.contains("id: 2"));
}

#[tokio::test]
async fn file_store_sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let open = || Harness::with_store(Arc::new(FileStore::open(dir.path()).unwrap()));
    let h = open();
    let s = h.create(one_story_catalog(), 3).await;
    h.to_preliminary_vote(&s).await;
    h.cast_all(&s, &["always", "never"]).await;
    let before = h.state(&s, &s.assessor).await["snapshot"].clone();
    let started = h.cmd(&s, &s.assessor, Some("k"), "round_status", json!({})).await;
    drop(h);

    let h = open();
    assert_eq!(h.state(&s, &s.assessor).await["snapshot"], before);
    let roster_file = std::fs::read_to_string(dir.path().join(&s.id).join("roster.json")).unwrap();
    assert!(!roster_file.contains(&s.assessor), "credentials are stored hashed");
    assert_eq!(
        h.cmd(&s, &s.assessor, Some("k"), "round_status", json!({})).await.0,
        started.0
    );
    let flags = |state: Value| -> Vec<Value> {
        state["round_status"]["has_cast"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["has_cast"].clone())
            .collect()
    };
    assert_eq!(flags(h.state(&s, &s.assessor).await), vec![json!(true), json!(true), json!(false)]);
    let (status, body) = h
        .cmd(&s, &s.practitioners[0], None, "cast_vote", json!({"card": "seldom"}))
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "a seat that voted cannot vote again");
    assert_eq!(body["error"]["code"], "guard:ballot_unavailable");
    let (status, body) = h
        .cmd(&s, &s.practitioners[2], None, "cast_vote", json!({"card": "seldom"}))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(flags(h.state(&s, &s.assessor).await), vec![json!(true); 3]);
    let (status, body) = h.cmd(&s, &s.assessor, None, "reveal", json!({})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["reply"]["detail"]["distribution"]["total"], 3);
    assert!(!dir.path().join(&s.id).join("ballot_progress.json").exists());
}
