//! HTTP/JSON interface of the review workflow.
//!
//! | method | path               | body / query                               |
//! |--------|--------------------|--------------------------------------------|
//! | GET    | `/codes`           |                                            |
//! | GET    | `/candidates`      | `status=all\|unrated\|rated`, `disease=`   |
//! | GET    | `/candidates/{id}` |                                            |
//! | POST   | `/ratings`         | `{candidate_id, code, comment?, reviewer}` |
//! | GET    | `/summary`         |                                            |
//! | POST   | `/apply`           | `{accept_codes?}`                          |
//! | GET    | `/graph/stats`     |                                            |
//!
//! Errors are `{"error": message}` with 400, 404, 422 or 500.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgrefine_core::graph::{graph_stats, load_graph, save_graph, Graph, GraphStats};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::{
    apply_accepted, Candidate, CandidateSet, Changelog, Rating, RatingCode, RatingLog, RatingRequest, ReviewError,
    ReviewStore, ReviewSummary,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub candidates: PathBuf,
    pub kg: PathBuf,
    pub ratings: PathBuf,
}

/// Shared state behind the router. Ratings go through one writer lock;
/// apply holds the graph lock exclusively until the graph is persisted.
#[derive(Debug)]
pub struct ReviewService {
    store: RwLock<ReviewStore>,
    graph: RwLock<Graph>,
    kg_path: Option<PathBuf>,
}

impl ReviewService {
    /// With `kg_path` set, every apply that adds edges rewrites that file.
    pub fn new(store: ReviewStore, graph: Graph, kg_path: Option<PathBuf>) -> Self {
        ReviewService { store: RwLock::new(store), graph: RwLock::new(graph), kg_path }
    }

    pub fn open(candidates: &Path, kg: &Path, ratings: &Path) -> Result<Self, ReviewError> {
        let store = ReviewStore::open(CandidateSet::load(candidates)?, RatingLog::open(ratings)?)?;
        Ok(ReviewService::new(store, load_graph(kg)?, Some(kg.to_path_buf())))
    }

    pub fn store(&self) -> RwLockReadGuard<'_, ReviewStore> {
        self.store.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn store_mut(&self) -> RwLockWriteGuard<'_, ReviewStore> {
        self.store.write().unwrap_or_else(PoisonError::into_inner)
    }

    pub fn graph(&self) -> RwLockReadGuard<'_, Graph> {
        self.graph.read().unwrap_or_else(PoisonError::into_inner)
    }

    /// Applies accepted ratings to a copy of the graph, persists it and only
    /// then swaps it in.
    pub fn apply(&self, accept: &BTreeSet<RatingCode>) -> Result<Changelog, ReviewError> {
        let store = self.store();
        let mut graph = self.graph.write().unwrap_or_else(PoisonError::into_inner);
        let mut updated = graph.clone();
        let log = apply_accepted(&mut updated, store.candidates(), store.active(), accept);
        if !log.added.is_empty() {
            if let Some(path) = &self.kg_path {
                persist_graph(&updated, path)?;
            }
            *graph = updated;
        }
        Ok(log)
    }
}

fn persist_graph(graph: &Graph, path: &Path) -> Result<(), ReviewError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    save_graph(graph, &tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/codes", get(list_codes))
        .route("/candidates", get(list_candidates))
        .route("/candidates/{id}", get(get_candidate))
        .route("/ratings", post(post_rating))
        .route("/summary", get(get_summary))
        .route("/apply", post(post_apply))
        .route("/graph/stats", get(get_graph_stats))
        .with_state(service)
}

/// Loads the inputs, binds `config.addr` and serves until the process ends.
pub async fn serve(config: ServeConfig) -> Result<(), ReviewError> {
    let service = Arc::new(ReviewService::open(&config.candidates, &config.kg, &config.ratings)?);
    let listener = TcpListener::bind(config.addr)
        .await
        .map_err(|source| ReviewError::Bind { addr: config.addr.to_string(), source })?;
    axum::serve(listener, router(service)).await?;
    Ok(())
}

type Shared = State<Arc<ReviewService>>;

struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            ReviewError::UnknownCandidate(_) => StatusCode::NOT_FOUND,
            ReviewError::InvalidCode(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body; an empty body yields the default value.
fn parse_body<T: DeserializeOwned + Default>(body: &[u8]) -> Result<T, ReviewError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ReviewError::InvalidRequest(e.to_string()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CodeEntry {
    pub code: RatingCode,
    pub description: &'static str,
}

fn code_table() -> Vec<CodeEntry> {
    RatingCode::ALL.into_iter().map(|code| CodeEntry { code, description: code.description() }).collect()
}

async fn list_codes() -> Json<Vec<CodeEntry>> {
    Json(code_table())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StatusFilter {
    #[default]
    All,
    Unrated,
    Rated,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ListQuery {
    #[serde(default)]
    status: StatusFilter,
    disease: Option<String>,
}

#[derive(Serialize)]
struct CandidateView<'a> {
    #[serde(flatten)]
    candidate: &'a Candidate,
    status: &'static str,
    ratings: Vec<&'a Rating>,
}

fn view<'a>(store: &'a ReviewStore, candidate: &'a Candidate) -> CandidateView<'a> {
    let ratings = store.active_for(&candidate.id);
    CandidateView { candidate, status: if ratings.is_empty() { "unrated" } else { "rated" }, ratings }
}

async fn list_candidates(
    State(service): Shared,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(query) = query.map_err(|e| ReviewError::InvalidRequest(e.body_text()))?;
    let store = service.store();
    let candidates: Vec<CandidateView> = store
        .candidates()
        .candidates
        .iter()
        .filter(|c| query.disease.as_ref().is_none_or(|d| &c.disease == d))
        .map(|c| view(&store, c))
        .filter(|v| match query.status {
            StatusFilter::All => true,
            StatusFilter::Unrated => v.ratings.is_empty(),
            StatusFilter::Rated => !v.ratings.is_empty(),
        })
        .collect();
    Ok(Json(json!({ "total": candidates.len(), "candidates": candidates })).into_response())
}

async fn get_candidate(State(service): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let store = service.store();
    let candidate = store.candidate(&id).ok_or_else(|| ReviewError::UnknownCandidate(id.clone()))?;
    let body = json!({
        "candidate": view(&store, candidate),
        "history": store.history_for(&id),
        "codes": code_table(),
    });
    Ok(Json(body).into_response())
}

async fn post_rating(State(service): Shared, body: Bytes) -> ApiResult<(StatusCode, Json<Rating>)> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ReviewError::InvalidRequest("missing rating body".into()).into());
    }
    let request: RatingRequest = serde_json::from_slice(&body).map_err(|e| ReviewError::InvalidRequest(e.to_string()))?;
    let rating = service.store_mut().record(request)?;
    Ok((StatusCode::CREATED, Json(rating)))
}

#[derive(Serialize)]
struct SummaryResponse<'a> {
    #[serde(flatten)]
    summary: &'a ReviewSummary,
    candidates: usize,
    codes: Vec<CodeEntry>,
}

async fn get_summary(State(service): Shared) -> Response {
    let store = service.store();
    let body = SummaryResponse {
        summary: store.summary(),
        candidates: store.candidates().candidates.len(),
        codes: code_table(),
    };
    Json(body).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyRequest {
    accept_codes: Option<Vec<i64>>,
}

async fn post_apply(State(service): Shared, body: Bytes) -> ApiResult<Json<Changelog>> {
    let request: ApplyRequest = parse_body(&body)?;
    let accept = match request.accept_codes {
        None => BTreeSet::from([RatingCode::CLEARLY_EXISTS]),
        Some(codes) if codes.is_empty() => {
            return Err(ReviewError::InvalidRequest("accept_codes must not be empty".into()).into())
        }
        Some(codes) => codes.into_iter().map(RatingCode::new).collect::<Result<_, _>>()?,
    };
    Ok(Json(service.apply(&accept)?))
}

async fn get_graph_stats(State(service): Shared) -> Json<GraphStats> {
    Json(graph_stats(&service.graph()))
}
