//! Expert review of predicted rule to risk-factor relations.
//!
//! [`generate_candidates`] turns a trained link predictor into a ranked list
//! of absent relations, [`ReviewStore`] keeps an append-only log of 1 to 5
//! ratings, and [`apply_accepted`] writes accepted relations back into the
//! curated graph. [`service`] exposes all of it over HTTP.

mod apply;
mod candidates;
mod codes;
pub mod service;
mod store;
mod summary;

use std::path::PathBuf;

use kgrefine_core::embedding::EmbedError;
use kgrefine_core::graph::GraphError;
use kgrefine_core::linkpred::LinkPredError;
use thiserror::Error;

pub use apply::{apply_accepted, AppliedEdge, Changelog, SkippedCandidate};
pub use candidates::{
    candidate_id, evaluation_counts, generate_candidates, Candidate, CandidateOptions, CandidateSet,
    DEFAULT_MIN_EVALUATIONS, UNASSIGNED_DISEASE,
};
pub use codes::{RatingCode, CODE_DESCRIPTIONS};
pub use service::{router, serve, ReviewService, ServeConfig};
pub use store::{active_ratings, Rating, RatingLog, RatingRequest, ReviewStore};
pub use summary::ReviewSummary;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("invalid rating code {0}, expected 1 to 5")]
    InvalidCode(i64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid candidate file: {0}")]
    InvalidCandidates(String),
    #[error("rating store {path} is corrupt at line {line}: {reason}")]
    CorruptStore { path: PathBuf, line: usize, reason: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    LinkPred(#[from] LinkPredError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
