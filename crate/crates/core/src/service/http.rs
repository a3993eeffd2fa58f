//! JSON API over a [`Campaign`]. Routes are described in `docs/api.md`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use super::campaign::Campaign;
use super::{DecisionKind, ServiceError};
use crate::dataset::export_dataset;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownProposal(_) | ServiceError::UnknownImage(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::LeaseExpired(_) | ServiceError::DuplicateDecision(_) | ServiceError::Withdrawn(_) => {
                StatusCode::CONFLICT
            }
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::CorruptLog(_) | ServiceError::InvalidCampaign(_) | ServiceError::Io { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let body = json!({ "error": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<Campaign>;
type ApiResult<T> = Result<T, ServiceError>;

#[derive(Debug, Deserialize)]
struct NewSession {
    annotator_id: String,
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    session_id: String,
    /// Predicate name, display name or numeric id.
    predicate: String,
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    session_id: String,
    proposal_id: String,
    decision: DecisionKind,
}

#[derive(Debug, Deserialize)]
struct FaultyBody {
    session_id: String,
    image_id: String,
    object_idx: usize,
}

#[derive(Debug, Serialize)]
struct PredicateEntry {
    predicate_id: usize,
    predicate: String,
    display_name: String,
    queued: usize,
    remaining: usize,
}

async fn open_session(State(c): State<Shared>, Json(body): Json<NewSession>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::CREATED, Json(c.open_session(&body.annotator_id)?)))
}

async fn close_session(State(c): State<Shared>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    c.close_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Predicates with queued proposals, fewest remaining first.
async fn predicates(State(c): State<Shared>) -> Json<Vec<PredicateEntry>> {
    let mut list: Vec<PredicateEntry> = c
        .stats()
        .predicates
        .into_iter()
        .map(|s| PredicateEntry {
            predicate_id: s.predicate_id,
            predicate: s.predicate,
            display_name: s.display_name,
            queued: s.queued,
            remaining: s.remaining,
        })
        .collect();
    list.sort_by_key(|p| (p.remaining, p.predicate_id));
    Json(list)
}

async fn next(State(c): State<Shared>, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    let predicate = c
        .with_spec(|s| s.categories().resolve_predicate(&q.predicate))
        .ok_or_else(|| ServiceError::BadRequest(format!("unknown predicate {}", q.predicate)))?;
    Ok(match c.next_proposal(&q.session_id, predicate)? {
        Some(p) => Json(p).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn decide(State(c): State<Shared>, Json(body): Json<DecisionBody>) -> ApiResult<impl IntoResponse> {
    Ok(Json(c.submit_decision(&body.session_id, &body.proposal_id, body.decision)?))
}

async fn faulty(State(c): State<Shared>, Json(body): Json<FaultyBody>) -> ApiResult<StatusCode> {
    c.mark_faulty(&body.session_id, &body.image_id, body.object_idx)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn stats(State(c): State<Shared>) -> impl IntoResponse {
    Json(c.stats())
}

fn raw_json(body: Vec<u8>) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn export(State(c): State<Shared>) -> Response {
    raw_json(export_dataset(&c.export().dataset))
}

async fn export_retrain(State(c): State<Shared>) -> Response {
    raw_json(export_dataset(&c.export().retrain))
}

async fn export_conflicts(State(c): State<Shared>) -> Json<Value> {
    let e = c.export();
    Json(json!({ "decisions": e.conflicts, "triplets": e.triplet_conflicts }))
}

/// Builds the API router. Images and masks are served from the campaign
/// directory when there is one; `ui_dir` is mounted at `/`.
pub fn router(campaign: Shared, ui_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/api/sessions", post(open_session))
        .route("/api/sessions/{id}", delete(close_session))
        .route("/api/predicates", get(predicates))
        .route("/api/next", get(next))
        .route("/api/decisions", post(decide))
        .route("/api/faulty-object", post(faulty))
        .route("/api/stats", get(stats))
        .route("/api/export", get(export))
        .route("/api/export/retrain", get(export_retrain))
        .route("/api/export/conflicts", get(export_conflicts));
    if let Some(paths) = campaign.paths() {
        app = app
            .nest_service("/images", ServeDir::new(paths.images()))
            .nest_service("/masks", ServeDir::new(paths.masks()));
    }
    if let Some(dir) = ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.with_state(campaign)
}

/// Serves the campaign until Ctrl-C, then writes a snapshot.
pub async fn serve(campaign: Shared, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(campaign.clone(), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Err(e) = campaign.snapshot() {
        log::warn!("final snapshot failed: {e}");
    }
    Ok(())
}
