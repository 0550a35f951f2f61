//! Holdout evaluation protocol, end-to-end pipeline runs and ablations.

mod ablation;
mod config;
mod metrics;
mod pipeline;
mod split;

use thiserror::Error;

use crate::embedding::EmbedError;
use crate::graph::GraphError;
use crate::ingest::IngestError;
use crate::linkpred::LinkPredError;
use crate::walks::WalkError;

pub use ablation::{run_ablation, AblationAxis, AblationReport, AblationRow, DIMENSIONS, PER_RULE_K};
pub use config::{DataSource, GraphVariant, PatientTables, RunConfig};
pub use metrics::{evaluate, Confusion, Metrics};
pub use pipeline::{
    run_pipeline, DatasetCounts, GraphSummary, LabeledPairs, RunArtifacts, RunOutcome, RunReport, Session,
};
pub use split::{holdout_split, HoldoutSplit, SplitSpec, MIN_CONDITION_EDGES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for test pair ({rule}, {factor})")]
    MissingPrediction { rule: String, factor: String },
    #[error("{found} condition edges, at least {required} needed for a holdout split")]
    TooFewEdges { found: usize, required: usize },
    #[error("unknown ablation axis {0:?}")]
    InvalidAxis(String),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("base graph contains patient-level node `{node}` ({kind})")]
    PatientDataInBase { node: String, kind: String },
    #[error("walk corpus contains {hits} held-out triples")]
    Leakage { hits: usize },
    #[error("graph stage: {0}")]
    Graph(#[from] GraphError),
    #[error("ingest stage: {0}")]
    Ingest(#[from] IngestError),
    #[error("walk stage: {0}")]
    Walk(#[from] WalkError),
    #[error("embedding stage: {0}")]
    Embed(#[from] EmbedError),
    #[error("link prediction stage: {0}")]
    LinkPred(#[from] LinkPredError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
