//! Configuration loading and the HTTP front end of the query service.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bioquery_core::explain::TemplateTable;
use bioquery_core::kb::{IngestReport, SourceManifest};
use bioquery_core::service::{ServiceError, DEFAULT_CACHE_CAPACITY};
use bioquery_core::{FactStore, Lexicon, RuleLayer, Service};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

/// File locations; `None` selects the built-in default (or an empty KB).
#[derive(Debug, Clone, Default)]
pub struct Config {
    pub rules: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_rules(path: &Path) -> Result<RuleLayer> {
    RuleLayer::parse(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// Loads every file of a manifest, logging rejected rows.
pub fn load_manifest(path: &Path) -> Result<(FactStore, Vec<(PathBuf, IngestReport)>)> {
    let manifest = SourceManifest::read(path)?;
    let (store, reports) = manifest.load()?;
    for (file, report) in &reports {
        for err in &report.errors {
            log::warn!("{}: {}", file.display(), err);
        }
    }
    Ok((store, reports))
}

impl Config {
    pub fn build(&self) -> Result<Service> {
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::load(&read(p)?).with_context(|| format!("in {}", p.display()))?,
            None => Lexicon::default_lexicon(),
        };
        let layer = match &self.rules {
            Some(p) => load_rules(p)?,
            None => RuleLayer::default_layer(),
        };
        let templates = match &self.templates {
            Some(p) => TemplateTable::load(&read(p)?).with_context(|| format!("in {}", p.display()))?,
            None => TemplateTable::default_templates(),
        };
        let store = match &self.manifest {
            Some(p) => load_manifest(p)?.0,
            None => FactStore::new(),
        };
        Ok(Service::new(lexicon, layer, templates, store, DEFAULT_CACHE_CAPACITY))
    }
}

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0.body())).into_response()
    }
}

#[derive(Deserialize)]
struct QueryRequest {
    text: String,
}

#[derive(Deserialize)]
struct ExplainRequest {
    query_id: String,
    answer: Vec<String>,
}

#[derive(Deserialize)]
struct CompleteParams {
    #[serde(default)]
    prefix: String,
}

#[derive(Serialize)]
struct Completion {
    tokens: Vec<String>,
}

type Shared = Arc<Service>;

async fn query(State(svc): State<Shared>, Json(req): Json<QueryRequest>) -> Result<Response, ApiError> {
    let res = tokio::task::spawn_blocking(move || svc.handle_query(&req.text))
        .await
        .expect("query task panicked")
        .map_err(ApiError)?;
    Ok(Json(res).into_response())
}

async fn explain(State(svc): State<Shared>, Json(req): Json<ExplainRequest>) -> Result<Response, ApiError> {
    let res = tokio::task::spawn_blocking(move || svc.handle_explain(&req.query_id, &req.answer))
        .await
        .expect("explain task panicked")
        .map_err(ApiError)?;
    Ok(Json(res).into_response())
}

async fn complete(State(svc): State<Shared>, Query(p): Query<CompleteParams>) -> Json<Completion> {
    Json(Completion {
        tokens: svc.handle_complete(&p.prefix),
    })
}

async fn vocabulary(State(svc): State<Shared>) -> Response {
    Json(svc.vocabulary()).into_response()
}

async fn stats(State(svc): State<Shared>) -> Response {
    Json(svc.stats()).into_response()
}

/// The API routes; static files under `static_dir` are served for all
/// other paths.
pub fn router(service: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/query", post(query))
        .route("/api/explain", post(explain))
        .route("/api/complete", get(complete))
        .route("/api/vocabulary", get(vocabulary))
        .route("/api/stats", get(stats))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
