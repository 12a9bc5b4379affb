//! HTTP/JSON front end for teaching sessions.
//!
//! Endpoints:
//!
//! - `POST /sessions` with `{"scenario": <builtin name or inline scenario>, "learner": {"kind": ...}}`
//! - `GET /sessions/{id}`: the state document
//! - `POST /sessions/{id}/actions` with `{"version": n, "response": <teacher response>}`
//! - `GET /sessions/{id}/events`: the event log as JSON lines
//! - `GET /scenarios`: built-in scenario names
//!
//! Errors are `{"code", "message"}` with a matching status. Actions carry
//! the version they were based on; a stale version is rejected with 409.

pub mod boundary;
pub mod state;

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::{Mutex, RwLock};

use prederr::domain::DomainError;
use prederr::learners::{LearnerKind, LearnerSpec};
use prederr::protocol::{ProtocolError, TeacherResponse, TeachingSession};
use prederr::scenarios::{self, Scenario};

pub use state::StateDocument;

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

fn protocol_error(e: ProtocolError) -> ApiError {
    let msg = e.to_string();
    match e {
        ProtocolError::WrongResponse { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "wrong-response", msg),
        ProtocolError::OutsideInvalidationSet(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "outside-invalidation-set", msg)
        }
        ProtocolError::UnknownFeature(_) | ProtocolError::FeatureInUse(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad-feature", msg)
        }
        ProtocolError::Finished => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "session-done", msg),
        ProtocolError::Domain(DomainError::UnknownObject(_) | DomainError::AlreadyLabeled(_)) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad-example", msg)
        }
        ProtocolError::InconsistentLearner(_) => ApiError::bad_request("inconsistent-learner", msg),
        _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg),
    }
}

struct Entry {
    session: TeachingSession,
    version: u64,
}

/// In-memory session store. Each session has its own lock, so actions on one
/// session are serialized while different sessions proceed independently.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Entry>>>>>,
}

impl AppState {
    async fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no-such-session", format!("no session {id}")))
    }
}

pub fn router() -> Router {
    router_with(AppState::default())
}

pub fn router_with(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/events", get(get_events))
        .with_state(state)
}

/// Serves until the listener fails or ctrl-c is received.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn list_scenarios() -> Json<Value> {
    Json(serde_json::json!({ "scenarios": scenarios::BUILTIN_NAMES }))
}

#[derive(Deserialize)]
struct CreateRequest {
    scenario: Value,
    #[serde(default)]
    learner: Option<Value>,
}

#[derive(Serialize)]
struct Created {
    id: String,
    state: StateDocument,
}

fn parse_scenario(v: &Value) -> Result<Scenario, ApiError> {
    match v {
        Value::String(name) => scenarios::builtin(name).map_err(|e| ApiError::bad_request("unknown-scenario", e.to_string())),
        Value::Object(_) => Scenario::from_json(&v.to_string()).map_err(|e| ApiError::bad_request("bad-scenario", e.to_string())),
        _ => Err(ApiError::bad_request("bad-scenario", "scenario must be a builtin name or an inline scenario")),
    }
}

/// Accepts `"1nn"`-style names for parameterless kinds or a full
/// `{"kind": ..., ...}` object. Defaults to maximum-likelihood logistic
/// regression.
fn parse_learner(v: Option<&Value>) -> Result<LearnerSpec, ApiError> {
    let kind: LearnerKind = match v {
        None => LearnerKind::LogregMl,
        Some(Value::String(s)) => serde_json::from_value(serde_json::json!({ "kind": s }))
            .map_err(|e| ApiError::bad_request("unknown-learner", e.to_string()))?,
        Some(other) => serde_json::from_value(other.clone()).map_err(|e| ApiError::bad_request("unknown-learner", e.to_string()))?,
    };
    LearnerSpec::new(kind).map_err(|e| ApiError::bad_request("bad-learner", e.to_string()))
}

async fn create_session(State(app): State<AppState>, body: Result<Json<CreateRequest>, axum::extract::rejection::JsonRejection>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request("bad-request", e.body_text()))?;
    let scenario = parse_scenario(&req.scenario)?;
    let spec = parse_learner(req.learner.as_ref())?;
    if !spec.kind.is_consistent() {
        return Err(ApiError::bad_request(
            "inconsistent-learner",
            format!("teaching requires a consistent learning algorithm (logreg-ml or 1nn); {} is not consistent", spec.kind),
        ));
    }
    let session = TeachingSession::new(scenario, spec).map_err(protocol_error)?;
    let id = uuid::Uuid::new_v4().to_string();
    let state = StateDocument::build(&id, &session, 1).map_err(protocol_error)?;
    app.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(Entry { session, version: 1 })));
    Ok((StatusCode::CREATED, Json(Created { id, state })))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<StateDocument>, ApiError> {
    let entry = app.entry(&id).await?;
    let e = entry.lock().await;
    StateDocument::build(&id, &e.session, e.version).map(Json).map_err(protocol_error)
}

#[derive(Deserialize)]
struct ActionRequest {
    version: u64,
    response: TeacherResponse,
}

async fn post_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<StateDocument>, ApiError> {
    let entry = app.entry(&id).await?;
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad-action", e.body_text()))?;
    let mut e = entry.lock().await;
    if req.version != e.version {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale-version",
            format!("action based on version {}, session is at {}", req.version, e.version),
        ));
    }
    e.session.step(req.response).map_err(protocol_error)?;
    e.version += 1;
    StateDocument::build(&id, &e.session, e.version).map(Json).map_err(protocol_error)
}

async fn get_events(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = app.entry(&id).await?;
    let body = entry.lock().await.session.event_log_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
