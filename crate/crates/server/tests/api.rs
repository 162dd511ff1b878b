use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use pointillism_core::campaign::CampaignConfig;
use pointillism_core::formats::{encode_label_map, read_answer_log, ClassDictionary};
use pointillism_core::layout::{write_campaign_dir, ImageEntry};
use pointillism_core::sampling::{StrategyKind, StrategySpec};
use pointillism_core::wire::{AnswerBody, NextResponse, Progress, VerdictCounts};
use pointillism_core::{ClassId, LabelMap, ScoreMap};
use pointillism_server::{router, CampaignService, ManualClock, Registry, ServiceOptions};
use serde_json::Value;
use tower::ServiceExt;

/// One 4x4 single-class image: `ppi` questions, no follow-up rounds.
fn write_fixture(dir: &Path, ppi: usize, k: u32, lease_secs: u64) {
    let cfg = CampaignConfig {
        ppi,
        replication: k,
        max_rounds: 1,
        strategy: StrategySpec::new(StrategyKind::Uniform, 1),
        lease_secs,
        ..CampaignConfig::default()
    };
    let gt = LabelMap::filled(4, 4, 1, ClassId(0)).unwrap();
    let entry = ImageEntry {
        image_id: "img".into(),
        image: Some((encode_label_map(&gt), "pgm".into())),
        ground_truth: Some(gt),
        score_maps: vec![ScoreMap::new(4, 4, 1, vec![1.0; 16]).unwrap()],
        image_level_labels: Some(BTreeSet::from([ClassId(0)])),
    };
    write_campaign_dir(dir, &cfg, &ClassDictionary::new(vec!["dog".into()]).unwrap(), &[entry]).unwrap();
}

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    clock: Arc<ManualClock>,
    service: Arc<CampaignService>,
}

fn fixture(ppi: usize, k: u32) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), ppi, k, 120);
    let clock = Arc::new(ManualClock::default());
    let service = Arc::new(
        CampaignService::open("demo", dir.path(), ServiceOptions { fsync: false, clock: clock.clone() }).unwrap(),
    );
    let app = router(Registry::new([service.clone()]));
    Fixture { _dir: dir, app, clock, service }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn next(app: &Router, who: &str) -> NextResponse {
    let (s, v) = get_json(app, &format!("/api/next?annotator={who}")).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

fn question_id(n: &NextResponse) -> String {
    match n {
        NextResponse::Assignment { question, .. } => question.question_id.clone(),
        NextResponse::NoWork => panic!("expected an assignment"),
    }
}

async fn post_answer(app: &Router, body: &AnswerBody) -> (StatusCode, Value) {
    post_raw(app, serde_json::to_vec(body).unwrap()).await
}

async fn post_raw(app: &Router, body: Vec<u8>) -> (StatusCode, Value) {
    let req = Request::post("/api/answer").header("content-type", "application/json").body(Body::from(body)).unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn body(q: &str, who: &str, verdict: &str, ms: u64) -> AnswerBody {
    AnswerBody { question_id: q.into(), annotator: who.into(), verdict: verdict.into(), latency_ms: ms }
}

async fn progress(app: &Router) -> Progress {
    let (s, v) = get_json(app, "/api/progress").await;
    assert_eq!(s, StatusCode::OK);
    serde_json::from_value(v).unwrap()
}

#[tokio::test]
async fn same_annotator_cannot_take_two_replicas() {
    let f = fixture(1, 2);
    let first = next(&f.app, "A").await;
    assert!(matches!(first, NextResponse::Assignment { ref question, .. } if question.class_name == "dog"));
    assert_eq!(next(&f.app, "A").await, NextResponse::NoWork);
}

#[tokio::test]
async fn two_annotators_share_a_question() {
    let f = fixture(1, 2);
    let a = question_id(&next(&f.app, "A").await);
    let b = question_id(&next(&f.app, "B").await);
    assert_eq!(a, b);
    assert_eq!(next(&f.app, "C").await, NextResponse::NoWork);
}

#[tokio::test]
async fn lapsed_lease_returns_replica_to_pool() {
    let f = fixture(1, 1);
    let q = question_id(&next(&f.app, "A").await);
    assert_eq!(next(&f.app, "B").await, NextResponse::NoWork);
    f.clock.advance(Duration::from_secs(121));
    assert_eq!(question_id(&next(&f.app, "B").await), q);
    let (s, _) = post_answer(&f.app, &body(&q, "A", "YES", 500)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = post_answer(&f.app, &body(&q, "B", "YES", 500)).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn lease_expiry_is_reported() {
    let f = fixture(1, 1);
    match next(&f.app, "A").await {
        NextResponse::Assignment { lease_expiry_ms, image_url, .. } => {
            assert_eq!(lease_expiry_ms, 120_000);
            assert_eq!(image_url, "/images/img");
        }
        NextResponse::NoWork => panic!("expected work"),
    }
}

#[tokio::test]
async fn error_statuses() {
    let f = fixture(2, 1);
    let (s, _) = get_json(&f.app, "/api/next?annotator=bad%20id").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get_json(&f.app, "/api/next").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get_json(&f.app, "/api/next?annotator=A&campaign=other").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = get_json(&f.app, "/api/progress?campaign=demo").await;
    assert_eq!(s, StatusCode::OK);

    let q = question_id(&next(&f.app, "A").await);
    let (s, _) = post_answer(&f.app, &body("img-p9-r1", "A", "YES", 1)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, v) = post_answer(&f.app, &body(&q, "A", "MAYBE", 1)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("MAYBE"));
    let (s, _) = post_raw(&f.app, b"{\"question_id\": 3}".to_vec()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post_answer(&f.app, &body(&q, "B", "YES", 1)).await;
    assert_eq!(s, StatusCode::CONFLICT, "no lease held");

    let (s, _) = post_answer(&f.app, &body(&q, "A", "YES", 1)).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = post_answer(&f.app, &body(&q, "A", "YES", 1)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(progress(&f.app).await.answered, 1, "duplicate not double-counted");
    assert_eq!(read_answer_log(f.service.layout().log()).unwrap().records.len(), 1);
}

#[tokio::test]
async fn fresh_progress_and_mean_latency() {
    let f = fixture(1, 3);
    let p = progress(&f.app).await;
    assert_eq!((p.answered, p.questions_total, p.mean_latency_ms), (0, 3, None));
    for (who, ms) in [("A", 600), ("B", 800), ("C", 1000)] {
        let q = question_id(&next(&f.app, who).await);
        assert_eq!(post_answer(&f.app, &body(&q, who, "YES", ms)).await.0, StatusCode::OK);
    }
    let p = progress(&f.app).await;
    assert_eq!(p.mean_latency_ms, Some(800.0));
    assert_eq!(p.points_resolved, VerdictCounts { yes: 1, no: 0, unresolved: 0 });
}

/// Ten questions, k = 3, answered to give 3 YES, 5 NO and 2 UNRESOLVED.
async fn run_resolution_fixture(app: &Router) {
    let plan: [[&str; 3]; 10] = [
        ["YES", "YES", "YES"],
        ["YES", "YES", "YES"],
        ["YES", "YES", "YES"],
        ["NO", "NO", "NO"],
        ["NO", "NO", "NO"],
        ["NO", "NO", "NO"],
        ["NO", "NO", "NO"],
        ["NO", "NO", "NO"],
        ["YES", "NO", "YES"],
        ["NO", "NO", "UNSURE"],
    ];
    for verdicts in plan {
        let mut qid = None;
        for (j, v) in verdicts.iter().enumerate() {
            let who = format!("ann{j}");
            let q = question_id(&next(app, &who).await);
            assert_eq!(*qid.get_or_insert(q.clone()), q);
            let (s, ack) = post_answer(app, &body(&q, &who, v, 700)).await;
            assert_eq!(s, StatusCode::OK);
            assert_eq!(ack["resolution"].is_null(), j < 2);
        }
    }
}

#[tokio::test]
async fn resolution_fixture_over_http() {
    let f = fixture(10, 3);
    run_resolution_fixture(&f.app).await;
    let p = progress(&f.app).await;
    assert_eq!(p.points_resolved, VerdictCounts { yes: 3, no: 5, unresolved: 2 });
    assert_eq!(p.answered, 30);

    let (s, csv) = call(&f.app, Request::get("/api/labels").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.matches(",UNRESOLVED,").count(), 2);
}

#[tokio::test]
async fn restart_replays_to_identical_progress() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 10, 3, 120);
    let before = {
        let service = Arc::new(CampaignService::open("demo", dir.path(), ServiceOptions::default()).unwrap());
        let app = router(Registry::new([service]));
        run_resolution_fixture(&app).await;
        progress(&app).await
    };
    // Simulate a crash mid-write: a torn record after the last ack.
    let log = dir.path().join("answers.log");
    let mut bytes = std::fs::read(&log).unwrap();
    bytes.extend_from_slice(b"{\"question_id\":\"img-p0");
    std::fs::write(&log, bytes).unwrap();

    let service = Arc::new(CampaignService::open("demo", dir.path(), ServiceOptions::default()).unwrap());
    let app = router(Registry::new([service.clone()]));
    assert_eq!(progress(&app).await, before);
    assert_eq!(service.labels_csv().unwrap().len(), {
        let s2 = CampaignService::open("again", dir.path(), ServiceOptions::default()).unwrap();
        s2.labels_csv().unwrap().len()
    });
    assert_eq!(next(&app, "ann0").await, NextResponse::NoWork);
    let replay = read_answer_log(&log).unwrap();
    assert_eq!((replay.records.len(), replay.truncated), (30, None));
}

#[tokio::test]
async fn answered_annotators_are_not_reassigned_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 1, 2, 120);
    {
        let service = Arc::new(CampaignService::open("demo", dir.path(), ServiceOptions::default()).unwrap());
        let app = router(Registry::new([service]));
        let q = question_id(&next(&app, "A").await);
        assert_eq!(post_answer(&app, &body(&q, "A", "NO", 5)).await.0, StatusCode::OK);
    }
    let service = Arc::new(CampaignService::open("demo", dir.path(), ServiceOptions::default()).unwrap());
    let app = router(Registry::new([service]));
    assert_eq!(next(&app, "A").await, NextResponse::NoWork);
    assert!(matches!(next(&app, "B").await, NextResponse::Assignment { .. }));
}

#[tokio::test]
async fn images_are_served_with_content_type() {
    let f = fixture(1, 1);
    let resp = f.app.clone().oneshot(Request::get("/images/img").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/x-portable-graymap");
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    assert!(bytes.starts_with(b"P5"));
    let (s, _) = call(&f.app, Request::get("/images/nope").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn several_campaigns_need_a_name() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_fixture(d1.path(), 1, 1, 120);
    write_fixture(d2.path(), 2, 1, 120);
    let a = Arc::new(CampaignService::open("a", d1.path(), ServiceOptions::default()).unwrap());
    let b = Arc::new(CampaignService::open("b", d2.path(), ServiceOptions::default()).unwrap());
    let app = router(Registry::new([a, b]));
    assert_eq!(get_json(&app, "/api/progress").await.0, StatusCode::BAD_REQUEST);
    let (s, v) = get_json(&app, "/api/progress?campaign=b").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["questions_total"], 2);
}
