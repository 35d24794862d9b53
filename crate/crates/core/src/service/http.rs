use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::{AnnotationService, ServeConfig, ServiceError, Submission};
use crate::corpus::to_jsonl;

pub const TOKEN_HEADER: &str = "x-rater-token";

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownRater(_) => StatusCode::FORBIDDEN,
            ServiceError::BadToken(_) => StatusCode::UNAUTHORIZED,
            ServiceError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Io { .. } | ServiceError::CorruptLog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let field = match &self {
            ServiceError::Invalid { field, .. } => Some(field.clone()),
            _ => None,
        };
        let body = json!({ "error": self.to_string(), "field": field });
        (self.status(), Json(body)).into_response()
    }
}

type Shared = Arc<AnnotationService>;

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

fn token(headers: &HeaderMap) -> Option<&str> {
    headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok())
}

async fn next_task(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<RaterQuery>,
) -> Result<Response, ServiceError> {
    svc.authenticate(&q.rater, token(&headers))?;
    Ok(match svc.next_task(&q.rater)? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Json(sub): Json<Submission>,
) -> Result<Response, ServiceError> {
    svc.authenticate(&sub.rater, token(&headers))?;
    let svc2 = svc.clone();
    // the log write syncs to disk, so keep it off the async workers
    let ack = tokio::task::spawn_blocking(move || svc2.submit(&sub))
        .await
        .expect("submit task panicked")?;
    Ok(Json(ack).into_response())
}

async fn stats(State(svc): State<Shared>) -> Response {
    Json(svc.stats()).into_response()
}

fn jsonl(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn export_ratings(State(svc): State<Shared>) -> Response {
    jsonl(svc.with_store(|s| to_jsonl(s.export_ratings())))
}

async fn export_judgements(State(svc): State<Shared>) -> Response {
    jsonl(svc.with_store(|s| to_jsonl(s.export_judgements())))
}

async fn export_overrides(State(svc): State<Shared>) -> Response {
    jsonl(svc.with_store(|s| to_jsonl(s.export_overrides().to_records())))
}

/// The API routes, plus the UI bundle as a fallback when one is given.
pub fn router(svc: Shared, ui_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/task", get(next_task))
        .route("/api/submit", post(submit))
        .route("/api/stats", get(stats))
        .route("/api/export/ratings", get(export_ratings))
        .route("/api/export/judgements", get(export_judgements))
        .route("/api/export/overrides", get(export_overrides))
        .with_state(svc);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: &ServeConfig, svc: Shared) -> anyhow::Result<()> {
    let app = router(svc, config.ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
