//! HTTP/JSON decision service.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET  | `/api/health` | |
//! | POST | `/api/sessions` | `{scenario}` |
//! | GET  | `/api/sessions/{id}` | |
//! | POST | `/api/sessions/{id}/step` | `{count}` |
//! | POST | `/api/sessions/{id}/model` | `{model}` |
//! | POST | `/api/sessions/{id}/whatif` | `{model?, alpha?, horizon}` |
//! | POST | `/api/identify` | `{criteria, thresholds, exponent?, scores \| ranking}` |
//!
//! Errors come back as `{"error": "..."}` with status 400 or 404.

pub mod session;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use dynflow_core::dataset::scenario_from_value;
use dynflow_core::{
    fit_weights_from_ranking, fit_weights_from_scores, CriteriaMatrix, Error, FilterConfig, PreferenceModel,
    RankEvent, Ranking, ThresholdTriple, TrajectoryStep, DEFAULT_EXPONENT,
};

pub use session::{Session, SessionStore, DEFAULT_IDLE_TIMEOUT};

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::BadRequest(e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path.is_empty() || path == "." {
            ApiError::BadRequest(e.inner().to_string())
        } else {
            ApiError::BadRequest(format!("{path}: {}", e.inner()))
        }
    })
}

fn unknown(id: &str) -> ApiError {
    ApiError::NotFound(format!("no session {id:?}"))
}

#[derive(Clone)]
struct AppState {
    store: Arc<SessionStore>,
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    step: usize,
    alternative_ids: Vec<String>,
    scores: Vec<f64>,
    ranking: Ranking,
}

impl SessionView {
    fn of(s: &Session) -> Self {
        SessionView {
            session_id: s.id().to_string(),
            step: s.step(),
            alternative_ids: s.alternative_ids().to_vec(),
            scores: s.scores().to_vec(),
            ranking: s.ranking(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    scenario: Value,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateRequest = parse_body(&body)?;
    let scenario = scenario_from_value(req.scenario, None).map_err(|e| match e {
        Error::Schema { path, message } => ApiError::BadRequest(format!("scenario.{path}: {message}")),
        other => other.into(),
    })?;
    let session = app.store.create(scenario)?;
    Ok((StatusCode::CREATED, Json(SessionView::of(&session))))
}

#[derive(Serialize)]
struct StateView {
    #[serde(flatten)]
    current: SessionView,
    history: Vec<TrajectoryStep>,
    events: Vec<RankEvent>,
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<StateView>> {
    app.store
        .read(&id, |s| StateView {
            current: SessionView::of(s),
            history: s.history().to_vec(),
            events: s.events().to_vec(),
        })
        .map(Json)
        .ok_or_else(|| unknown(&id))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    #[serde(default = "one")]
    count: i64,
}

fn one() -> i64 {
    1
}

#[derive(Serialize)]
struct StepView {
    step: usize,
    scores: Vec<f64>,
    ranking: Ranking,
    new_events: Vec<RankEvent>,
}

async fn advance(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<StepView>> {
    let req: StepRequest = parse_body(&body)?;
    if req.count < 1 {
        return Err(ApiError::BadRequest(format!(
            "count must be at least 1 (got {})",
            req.count
        )));
    }
    let count = req.count as usize;
    app.store
        .write(&id, |s| {
            let new_events = s.advance(count)?;
            Ok(StepView {
                step: s.step(),
                scores: s.scores().to_vec(),
                ranking: s.ranking(),
                new_events,
            })
        })
        .ok_or_else(|| unknown(&id))?
        .map(Json)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRequest {
    model: PreferenceModel,
}

async fn update_preferences(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    // Look the session up first so an unknown id is a 404 even with a bad body.
    app.store.read(&id, |_| ()).ok_or_else(|| unknown(&id))?;
    let req: ModelRequest = parse_body(&body)?;
    let step = app
        .store
        .write(&id, |s| s.update_model(req.model))
        .ok_or_else(|| unknown(&id))??;
    Ok(Json(json!({ "acknowledged_at_step": step })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    #[serde(default)]
    model: Option<PreferenceModel>,
    #[serde(default)]
    alpha: Option<f64>,
    horizon: usize,
}

#[derive(Serialize)]
struct WhatIfView {
    trajectory: Vec<TrajectoryStep>,
    events: Vec<RankEvent>,
}

async fn what_if(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<WhatIfView>> {
    app.store.read(&id, |_| ()).ok_or_else(|| unknown(&id))?;
    let req: WhatIfRequest = parse_body(&body)?;
    let filter = req.alpha.map(FilterConfig::from_alpha).transpose()?;
    let (trajectory, events) = app
        .store
        .read(&id, |s| s.what_if(req.model, filter, req.horizon))
        .ok_or_else(|| unknown(&id))??;
    Ok(Json(WhatIfView { trajectory, events }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentifyRequest {
    criteria: CriteriaMatrix,
    thresholds: Vec<ThresholdTriple>,
    #[serde(default)]
    exponent: Option<u32>,
    #[serde(default)]
    scores: Option<Vec<f64>>,
    #[serde(default)]
    ranking: Option<Vec<String>>,
}

async fn identify(body: Bytes) -> ApiResult<Json<Value>> {
    let req: IdentifyRequest = parse_body(&body)?;
    let n = req.criteria.n();
    let thresholds = match req.thresholds.len() {
        1 => vec![req.thresholds[0]; n],
        _ => req.thresholds,
    };
    let exponent = req.exponent.unwrap_or(DEFAULT_EXPONENT);
    let fit = match (req.scores, req.ranking) {
        (Some(scores), None) => fit_weights_from_scores(&req.criteria, &thresholds, exponent, &scores)?,
        (None, Some(ranking)) => fit_weights_from_ranking(&req.criteria, &thresholds, exponent, &ranking)?,
        _ => {
            return Err(ApiError::BadRequest(
                "give exactly one of `scores` or `ranking`".into(),
            ))
        }
    };
    Ok(Json(json!({
        "weights": fit.identified.weights,
        "residual": fit.identified.residual,
        "degenerate": fit.identified.degenerate,
        "method_note": fit.identified.method_note,
        "ranking_reproduced": fit.ranking_reproduced,
        "induced_ranking": fit.induced,
    })))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let uri = req.uri().clone();
    let started = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        "{method} {uri} {} {:.1}ms",
        response.status().as_u16(),
        started.elapsed().as_secs_f64() * 1e3
    );
    response
}

/// The service routes; with `static_dir`, unmatched paths are served from that
/// directory and `/` returns its `index.html`.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_state))
        .route("/api/sessions/{id}/step", post(advance))
        .route("/api/sessions/{id}/model", post(update_preferences))
        .route("/api/sessions/{id}/whatif", post(what_if))
        .route("/api/identify", post(identify))
        .with_state(AppState { store });
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    };
    app.layer(middleware::from_fn(log_request))
}

/// Serves `router` on an already bound listener until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}
