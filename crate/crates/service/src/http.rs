//! JSON-over-HTTP front end. Identity is taken from the `x-annotator-id`
//! and `x-annotator-expert` headers; no authentication is performed.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use sevbench::coreset::CoresetResult;
use sevbench::model::Interaction;

use crate::error::ServiceError;
use crate::service::{task_lease_view, AnnotationService, Window};
use crate::state::RootCause;

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";
pub const EXPERT_HEADER: &str = "x-annotator-expert";

type Shared = Arc<AnnotationService>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) | ServiceError::Severity(_) | ServiceError::Json(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::LeaseExpired(_) => StatusCode::GONE,
            ServiceError::Forbidden(_) => StatusCode::FORBIDDEN,
            ServiceError::CorruptLog { .. } | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        (status, Json(body)).into_response()
    }
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/v1/tasks/enqueue", post(enqueue))
        .route("/v1/tasks/next", get(next_task))
        .route("/v1/tasks/{id}", get(get_task))
        .route("/v1/tasks/{id}/judgments", post(submit))
        .route("/v1/tree", get(tree))
        .route("/v1/interactions/{id}", get(interaction))
        .route("/v1/flags", post(raise_flag))
        .route("/v1/flags/{id}/confirm", post(confirm_flag))
        .route("/v1/flags/records", get(flag_records))
        .route("/v1/leaderboard", get(leaderboard))
        .route("/v1/stats", get(stats))
        .with_state(service)
}

/// Serves until ctrl-c.
pub async fn serve(service: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct Identity {
    id: String,
    expert: bool,
}

fn parse_flag(v: &str) -> Result<bool, ServiceError> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        _ => Err(ServiceError::BadRequest(format!("expected a boolean, got {v:?}"))),
    }
}

fn identity(headers: &HeaderMap) -> Result<Identity, ServiceError> {
    let header = |name: &str| -> Result<Option<String>, ServiceError> {
        headers
            .get(name)
            .map(|v| {
                v.to_str()
                    .map(str::to_string)
                    .map_err(|_| ServiceError::BadRequest(format!("{name} is not valid text")))
            })
            .transpose()
    };
    let id = header(ANNOTATOR_HEADER)?.ok_or_else(|| ServiceError::BadRequest(format!("missing {ANNOTATOR_HEADER} header")))?;
    let expert = header(EXPERT_HEADER)?.map(|v| parse_flag(&v)).transpose()?.unwrap_or(false);
    Ok(Identity { id, expert })
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

#[derive(Deserialize)]
struct EnqueueRequest {
    result: CoresetResult,
    interactions: Vec<Interaction>,
    #[serde(default)]
    annotators_per_item: Option<usize>,
}

async fn enqueue(State(svc): State<Shared>, body: axum::body::Bytes) -> Result<Json<Value>, ServiceError> {
    let req: EnqueueRequest = parse_body(&body)?;
    let created = svc.enqueue_coreset(&req.result, &req.interactions, req.annotators_per_item)?;
    let total = svc.snapshot().tasks.len();
    Ok(Json(json!({ "created": created, "total_tasks": total })))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
    expert: Option<String>,
}

async fn next_task(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Result<Response, ServiceError> {
    let (id, expert) = match q.annotator {
        Some(id) => (id, q.expert.as_deref().map(parse_flag).transpose()?.unwrap_or(false)),
        None => {
            let who = identity(&headers)?;
            (who.id, who.expert)
        }
    };
    Ok(match svc.lease_next(&id, expert)? {
        Some(lease) => Json(lease).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn get_task(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError> {
    let state = svc.snapshot();
    let task = state.task_by_id(&id).ok_or_else(|| ServiceError::not_found("task", &id))?;
    let mut view = task_lease_view(task, &svc.tree().version);
    view["item_status"] = serde_json::to_value(state.items[&task.interaction_id].status)?;
    Ok(Json(view))
}

#[derive(Deserialize)]
struct SubmitRequest {
    #[serde(default)]
    annotator_id: Option<String>,
    judgments: BTreeMap<String, String>,
}

async fn submit(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<Value>, ServiceError> {
    let req: SubmitRequest = parse_body(&body)?;
    let annotator = match req.annotator_id {
        Some(a) => a,
        None => identity(&headers)?.id,
    };
    let outcome = svc.submit_judgments(&id, &annotator, &req.judgments)?;
    Ok(Json(serde_json::to_value(outcome)?))
}

async fn tree(State(svc): State<Shared>) -> Json<Value> {
    Json(serde_json::to_value(svc.tree()).expect("tree serializes"))
}

async fn interaction(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<Interaction>, ServiceError> {
    let state = svc.snapshot();
    let item = state.items.get(&id).ok_or_else(|| ServiceError::not_found("interaction", &id))?;
    Ok(Json(item.interaction.clone()))
}

#[derive(Deserialize)]
struct FlagRequest {
    interaction_id: String,
    root_cause: RootCause,
    #[serde(default)]
    comment: String,
}

async fn raise_flag(
    State(svc): State<Shared>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Result<(StatusCode, Json<Value>), ServiceError> {
    let who = identity(&headers)?;
    let req: FlagRequest = parse_body(&body)?;
    let flag = svc.flag_adversarial(&who.id, &req.interaction_id, req.root_cause, &req.comment)?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(flag)?)))
}

#[derive(Deserialize, Default)]
struct ConfirmRequest {
    #[serde(default)]
    judgments: Option<BTreeMap<String, String>>,
}

async fn confirm_flag(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<Value>, ServiceError> {
    let who = identity(&headers)?;
    let req: ConfirmRequest = if body.is_empty() { ConfirmRequest::default() } else { parse_body(&body)? };
    let flag = svc.confirm_flag(&id, &who.id, who.expert, req.judgments.as_ref())?;
    Ok(Json(serde_json::to_value(flag)?))
}

async fn flag_records(State(svc): State<Shared>) -> Json<Value> {
    Json(json!(svc.confirmed_flag_records()))
}

#[derive(Deserialize)]
struct LeaderboardQuery {
    window: Option<String>,
}

async fn leaderboard(
    State(svc): State<Shared>,
    Query(q): Query<LeaderboardQuery>,
) -> Result<Json<Value>, ServiceError> {
    let window: Window = q.window.as_deref().unwrap_or("30d").parse()?;
    Ok(Json(json!(svc.leaderboard(window))))
}

async fn stats(State(svc): State<Shared>) -> Json<Value> {
    Json(serde_json::to_value(svc.stats()).expect("stats serialize"))
}
