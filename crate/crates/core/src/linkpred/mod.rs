//! Rule to risk-factor link prediction.
//!
//! Labeled pairs come from existing condition edges (positives) and one of
//! three negative strategies. A pair is featurized as the rule vector
//! followed by the factor vector and scored by logistic regression, a
//! kernel SVM or a random forest, each tuned by stratified cross-validation.

mod classifier;
mod cv;
mod dataset;
pub mod forest;
pub mod logreg;
mod sampling;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classifier::{
    default_grid, fit, load_classifier, predict, read_classifier, save_classifier, write_classifier, ClassifierKind,
    ClassifierSpec, CvSummary, Grid, Hyperparams, Model, Prediction, SvmKernel, TrainedClassifier,
};
pub use cv::{cross_validate, stratified_folds, CvScore};
pub use dataset::{featurize, featurize_all, read_pairs, write_pairs, write_predictions, Standardizer};
pub use sampling::{
    condition_edges, negative_pairs_opposite, negative_pairs_per_rule, negative_pairs_random, opposite_factor,
    positive_pairs, NegativeStrategy, SamplingUniverse,
};

#[derive(Debug, Error)]
pub enum LinkPredError {
    #[error("requested {requested} absent pairs but only {available} exist")]
    InsufficientAbsentPairs { requested: usize, available: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("solver did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("feature length {got}, classifier expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid classifier settings: {0}")]
    InvalidSpec(String),
    #[error("pair file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("classifier file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSource {
    ExistingEdge,
    Random,
    PerRule,
    Opposite,
}

impl PairSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PairSource::ExistingEdge => "existing-edge",
            PairSource::Random => "random",
            PairSource::PerRule => "per-rule",
            PairSource::Opposite => "opposite",
        }
    }
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "existing-edge" => Ok(PairSource::ExistingEdge),
            "random" => Ok(PairSource::Random),
            "per-rule" => Ok(PairSource::PerRule),
            "opposite" => Ok(PairSource::Opposite),
            other => Err(format!("unknown pair source {other:?}")),
        }
    }
}

/// Labeled (rule, factor) pair. Positive exactly when it comes from an
/// existing edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairSample {
    pub rule: String,
    pub factor: String,
    pub source: PairSource,
}

impl PairSample {
    pub fn new(rule: impl Into<String>, factor: impl Into<String>, source: PairSource) -> Self {
        PairSample { rule: rule.into(), factor: factor.into(), source }
    }

    pub fn is_positive(&self) -> bool {
        self.source == PairSource::ExistingEdge
    }

    pub fn key(&self) -> (String, String) {
        (self.rule.clone(), self.factor.clone())
    }
}
