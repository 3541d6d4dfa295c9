use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dynflow_core::fixtures;
use dynflow_service::{router, SessionStore};

const TRADITIONAL_SCORES: [f64; 5] = [1.88107276, 1.74601871, -0.64209385, -1.42206757, -1.56293005];
const MILD_SCORES: [f64; 5] = [1.88107276, 2.12396587, -1.02711495, -1.21806757, -1.75985611];

fn app() -> Router {
    router(Arc::new(SessionStore::default()), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn model(weights: [f64; 4]) -> Value {
    let t = json!({"q": 0.0, "p": 0.1, "v": 0.3});
    json!({ "weights": weights, "thresholds": [t, t, t, t], "exponent": 3 })
}

fn scenario(alpha: f64, switch: bool) -> Value {
    let schedule = if switch {
        json!([{ "step": 0, "model": model(fixtures::MILD_WEIGHTS) }])
    } else {
        json!([])
    };
    json!({
        "criteria": fixtures::e1_criteria(),
        "initial_model": model(fixtures::TRADITIONAL_WEIGHTS),
        "filter": { "alpha": alpha },
        "horizon": 40,
        "schedule": schedule,
    })
}

fn scores(v: &Value) -> Vec<f64> {
    v["scores"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

async fn create(app: &Router, alpha: f64, switch: bool) -> String {
    let (status, body) = call(
        app,
        "POST",
        "/api/sessions",
        Some(json!({ "scenario": scenario(alpha, switch) })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_probe() {
    let (status, body) = call(&app(), "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn create_session_cases() {
    let app = app();
    let (status, body) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({ "scenario": scenario(0.5, true) })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["step"], 0);
    assert!(close(&scores(&body), &TRADITIONAL_SCORES, 1e-4));
    assert_eq!(body["ranking"][0]["id"], "613");

    let other = create(&app, 0.5, true).await;
    assert_ne!(other, body["session_id"].as_str().unwrap());

    let (status, body) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({ "scenario": scenario(1.5, true) })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("alpha"), "{body}");

    let mut broken = scenario(0.5, true);
    broken["initial_model"]["weights"] = json!([0.1, 0.4, 0.1]);
    let (status, body) = call(&app, "POST", "/api/sessions", Some(json!({ "scenario": broken }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(
        body["error"].as_str().unwrap().contains("initial_model"),
        "{body}"
    );

    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({ "nope": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn advance_cases() {
    let app = app();
    let id = create(&app, 0.5, true).await;
    let (status, body) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["step"], 1);
    assert!((scores(&body)[1] - 1.93499229).abs() < 1e-6);
    let events = body["new_events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["upper_id"], "2573");
    assert_eq!(events[0]["lower_id"], "613");

    let (_, body) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 100 })),
    )
    .await;
    assert!(close(&scores(&body), &MILD_SCORES, 1e-6));
    assert_eq!(body["new_events"].as_array().unwrap().len(), 0);

    for bad in [0, -3] {
        let (status, _) = call(
            &app,
            "POST",
            &format!("/api/sessions/{id}/step"),
            Some(json!({ "count": bad })),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
    let (status, _) = call(
        &app,
        "POST",
        "/api/sessions/nope/step",
        Some(json!({ "count": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn advance_k_equals_k_single_steps() {
    let app = app();
    let a = create(&app, 0.3, true).await;
    let b = create(&app, 0.3, true).await;
    let (_, bulk) = call(
        &app,
        "POST",
        &format!("/api/sessions/{a}/step"),
        Some(json!({ "count": 9 })),
    )
    .await;
    let mut last = Value::Null;
    for _ in 0..9 {
        last = call(
            &app,
            "POST",
            &format!("/api/sessions/{b}/step"),
            Some(json!({ "count": 1 })),
        )
        .await
        .1;
    }
    assert!(close(&scores(&bulk), &scores(&last), 1e-12));
}

#[tokio::test]
async fn get_state_cases() {
    let app = app();
    let id = create(&app, 0.5, true).await;
    let (status, body) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["step"], 0);
    assert_eq!(body["history"].as_array().unwrap().len(), 1);

    call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 3 })),
    )
    .await;
    let (_, body) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(body["step"], 3);
    assert_eq!(body["history"].as_array().unwrap().len(), 4);
    assert_eq!(body["events"].as_array().unwrap().len(), 1);

    let (status, _) = call(&app, "GET", "/api/sessions/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn update_preferences_cases() {
    let app = app();
    let id = create(&app, 0.5, false).await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 5 })),
    )
    .await;
    let (_, before) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;

    let uri = format!("/api/sessions/{id}/model");
    let (status, body) = call(
        &app,
        "POST",
        &uri,
        Some(json!({ "model": model(fixtures::MILD_WEIGHTS) })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["acknowledged_at_step"], 5);
    // identical resubmission is harmless
    let (status, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({ "model": model(fixtures::MILD_WEIGHTS) })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    let (_, after) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(before["history"], after["history"]);

    let (_, body) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 100 })),
    )
    .await;
    assert!(close(&scores(&body), &MILD_SCORES, 1e-6));

    let (status, body) = call(
        &app,
        "POST",
        &uri,
        Some(json!({ "model": model([0.1, 0.4, 0.1, 0.3]) })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("sum to 1"), "{body}");

    let (status, _) = call(
        &app,
        "POST",
        "/api/sessions/x/model",
        Some(json!({ "model": model(fixtures::MILD_WEIGHTS) })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn what_if_cases() {
    let app = app();
    let id = create(&app, 0.5, true).await;
    let (_, before) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    let uri = format!("/api/sessions/{id}/whatif");

    let crossing = |body: &Value| body["events"][0]["crossing_time"].as_f64().unwrap();
    let (status, fast) = call(&app, "POST", &uri, Some(json!({ "alpha": 0.5, "horizon": 20 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, slow) = call(&app, "POST", &uri, Some(json!({ "alpha": 0.1, "horizon": 20 }))).await;
    assert!(crossing(&fast) < crossing(&slow));
    assert!((crossing(&slow) - 4.196).abs() < 0.15);
    assert!((crossing(&fast) - 0.638).abs() < 0.15);

    let (_, after) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(before, after);

    let (_, echo) = call(&app, "POST", &uri, Some(json!({ "horizon": 0 }))).await;
    let steps = echo["trajectory"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["scores"], before["scores"]);

    let (_, plain) = call(&app, "POST", &uri, Some(json!({ "horizon": 3 }))).await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/step"),
        Some(json!({ "count": 3 })),
    )
    .await;
    let (_, state) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(plain["trajectory"], state["history"]);

    let (status, _) = call(&app, "POST", &uri, Some(json!({ "alpha": 2.0, "horizon": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/api/sessions/x/whatif",
        Some(json!({ "horizon": 3 })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = create(&app, 0.5, true).await;
    let b = create(&app, 0.1, false).await;
    let (_, b0) = call(&app, "GET", &format!("/api/sessions/{b}"), None).await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{a}/step"),
        Some(json!({ "count": 4 })),
    )
    .await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{a}/model"),
        Some(json!({ "model": model([0.25; 4]) })),
    )
    .await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{b}/step"),
        Some(json!({ "count": 2 })),
    )
    .await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{a}/step"),
        Some(json!({ "count": 1 })),
    )
    .await;
    let (_, b1) = call(&app, "GET", &format!("/api/sessions/{b}"), None).await;
    assert_eq!(b1["step"], 2);
    // b has no schedule change, so it stays at its initial scores
    assert!(close(&scores(&b1), &scores(&b0), 1e-12));
    let (_, a1) = call(&app, "GET", &format!("/api/sessions/{a}"), None).await;
    assert_eq!(a1["step"], 5);
}

#[tokio::test]
async fn identify_endpoint_cases() {
    let app = app();
    let base = json!({
        "criteria": fixtures::e1_criteria(),
        "thresholds": [{"q": 0.0, "p": 0.1, "v": 0.3}],
    });
    let mut by_scores = base.clone();
    by_scores["scores"] = json!(TRADITIONAL_SCORES);
    let (status, body) = call(&app, "POST", "/api/identify", Some(by_scores.clone())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let w: Vec<f64> = body["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(close(&w, &fixtures::TRADITIONAL_WEIGHTS, 1e-3));
    assert!(body["residual"].as_f64().unwrap() < 1e-10);

    let mut by_ranking = base.clone();
    by_ranking["ranking"] = json!(["2573", "613", "292", "162", "3062"]);
    let (status, body) = call(&app, "POST", "/api/identify", Some(by_ranking)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["ranking_reproduced"], true);

    let mut both = by_scores;
    both["ranking"] = json!(["613", "2573", "292", "162", "3062"]);
    let (status, _) = call(&app, "POST", "/api/identify", Some(both)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/api/identify", Some(base)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn serves_static_ui() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("index.html"),
        "<!doctype html><title>steering</title>",
    )
    .unwrap();
    let app = router(Arc::new(SessionStore::default()), Some(dir.path().to_path_buf()));
    let req = Request::builder().uri("/").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert!(String::from_utf8_lossy(&bytes).contains("steering"));
    let (status, _) = call(&app, "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
}
