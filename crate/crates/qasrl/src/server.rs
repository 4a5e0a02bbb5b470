//! Curation HTTP API.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | GET | `/items` | `?status=pending\|reviewed&language=` |
//! | GET | `/items/{key}` | |
//! | POST | `/items/{key}/edits` | `{"action": ..., "expected_version"?: n, ...}` |
//! | POST | `/items/{key}/qas/{i}/category` | `{"category": "M"}` |
//! | POST | `/import` | JSON array of records, or JSON lines |
//! | GET | `/export` | `?language=&include_pending=true`, returns JSON lines |
//! | GET | `/categories` | |
//!
//! Keys are `<sentence id>#<predicate index>`, percent-encoded in paths.
//! Errors are `{"error": message}` with 400, 401, 404 or 409.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qasrl_core::curation::{CurationError, Edit, ErrorCategory, ExportFilter, ReviewStatus};
use qasrl_core::record::Record;
use serde::Deserialize;
use serde_json::json;

use crate::curate::{PersistentStore, StoreError};
use crate::io::{parse_records, to_jsonl};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<PersistentStore>,
    /// Shared bearer token; `None` leaves the API open.
    pub token: Option<Arc<str>>,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.to_string())
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::Curation(CurationError::NotFound(_)) => StatusCode::NOT_FOUND,
            StoreError::Curation(CurationError::Conflict { .. } | CurationError::ImportConflict(_)) => {
                StatusCode::CONFLICT
            }
            StoreError::Curation(_) => StatusCode::BAD_REQUEST,
            StoreError::Data(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
struct ItemsQuery {
    status: Option<String>,
    language: Option<String>,
}

async fn list_items(State(s): State<AppState>, Query(q): Query<ItemsQuery>) -> ApiResult<Response> {
    let status: Option<ReviewStatus> =
        q.status.as_deref().filter(|s| !s.is_empty()).map(str::parse).transpose().map_err(bad)?;
    let items = s.store.with_store(|st| {
        st.items(status)
            .filter(|i| q.language.as_ref().is_none_or(|l| *l == i.record.language))
            .cloned()
            .collect::<Vec<_>>()
    });
    Ok(Json(items).into_response())
}

async fn get_item(State(s): State<AppState>, Path(key): Path<String>) -> ApiResult<Response> {
    let item = s.store.with_store(|st| st.get(&key).cloned()).map_err(StoreError::from)?;
    Ok(Json(item).into_response())
}

#[derive(Deserialize)]
struct EditBody {
    #[serde(default)]
    expected_version: Option<u64>,
    #[serde(flatten)]
    edit: Edit,
}

async fn post_edit(State(s): State<AppState>, Path(key): Path<String>, body: Bytes) -> ApiResult<Response> {
    let b: EditBody = serde_json::from_slice(&body).map_err(bad)?;
    let store = s.store.clone();
    let item = tokio::task::spawn_blocking(move || store.apply_edit(&key, b.edit, b.expected_version))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(item).into_response())
}

#[derive(Deserialize)]
struct CategoryBody {
    category: String,
}

async fn post_category(
    State(s): State<AppState>,
    Path((key, qa)): Path<(String, usize)>,
    body: Bytes,
) -> ApiResult<Response> {
    let b: CategoryBody = serde_json::from_slice(&body).map_err(bad)?;
    let category: ErrorCategory = b.category.parse().map_err(bad)?;
    let store = s.store.clone();
    let item = tokio::task::spawn_blocking(move || store.tag(&key, qa, category))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(item).into_response())
}

async fn post_import(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(bad)?;
    let records: Vec<Record> = if text.trim_start().starts_with('[') {
        let rs: Vec<Record> = serde_json::from_str(text).map_err(bad)?;
        for r in &rs {
            r.validate().map_err(bad)?;
        }
        rs
    } else {
        parse_records(text, "request body").map_err(bad)?
    };
    let store = s.store.clone();
    let n = tokio::task::spawn_blocking(move || store.import(records))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(json!({ "imported": n })).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    language: Option<String>,
    #[serde(default)]
    include_pending: bool,
}

async fn export(State(s): State<AppState>, Query(q): Query<ExportQuery>) -> Response {
    let filter = ExportFilter { language: q.language.filter(|l| !l.is_empty()), include_pending: q.include_pending };
    let body = to_jsonl(&s.store.export(&filter));
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/jsonl"))], body).into_response()
}

async fn categories(State(s): State<AppState>) -> Response {
    Json(s.store.with_store(|st| st.category_distribution())).into_response()
}

async fn require_token(State(s): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &s.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == &**token);
        if !ok {
            return ApiError(StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into()).into_response();
        }
    }
    next.run(req).await
}

/// The API router; with `ui_dir`, the built UI bundle is served under `/ui`.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/items", get(list_items))
        .route("/items/{key}", get(get_item))
        .route("/items/{key}/edits", post(post_edit))
        .route("/items/{key}/qas/{qa}/category", post(post_category))
        .route("/import", post(post_import))
        .route("/export", get(export))
        .route("/categories", get(categories))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, ui_dir: Option<PathBuf>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("curation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
