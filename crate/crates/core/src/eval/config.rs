use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvalError, SplitSpec};
use crate::embedding::TrainHyperparams;
use crate::ingest::SynthConfig;
use crate::linkpred::{ClassifierKind, ClassifierSpec, Grid, NegativeStrategy};
use crate::walks::{WalkConfig, WalkStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientTables {
    pub patients: PathBuf,
    pub diagnoses: PathBuf,
    pub labevents: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Planted-edge benchmark generated in memory.
    Synthetic {
        #[serde(default)]
        synth: SynthConfig,
        #[serde(default)]
        seed: u64,
    },
    Files {
        kg: PathBuf,
        #[serde(default)]
        patients: Option<PatientTables>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic { synth: SynthConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphVariant {
    /// Curated graph only.
    Baseline,
    /// Curated graph plus the patient cohort.
    Augmented,
}

impl GraphVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphVariant::Baseline => "baseline",
            GraphVariant::Augmented => "augmented",
        }
    }
}

impl fmt::Display for GraphVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(GraphVariant::Baseline),
            "augmented" => Ok(GraphVariant::Augmented),
            other => Err(format!("unknown graph variant {other:?}")),
        }
    }
}

/// Every setting of one pipeline run. `seed` drives all randomized stages;
/// each stage draws from its own keyed stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub variant: GraphVariant,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub walk_strategy: WalkStrategy,
    pub walk_depth: usize,
    pub walks_per_node: usize,
    pub dimension: usize,
    pub embedding: TrainHyperparams,
    pub negatives: NegativeStrategy,
    pub classifier: ClassifierKind,
    /// Empty selects the classifier's default grid.
    pub grid: Grid,
    pub folds: usize,
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let walks = WalkConfig::default();
        RunConfig {
            data: DataSource::default(),
            variant: GraphVariant::Augmented,
            seed: 0,
            holdout_fraction: SplitSpec::default().fraction,
            walk_strategy: walks.strategy,
            walk_depth: walks.depth,
            walks_per_node: walks.walks_per_node,
            dimension: 100,
            embedding: TrainHyperparams::default(),
            negatives: NegativeStrategy::Opposite,
            classifier: ClassifierKind::RandomForest,
            grid: Vec::new(),
            folds: 10,
            standardize: false,
        }
    }
}

impl RunConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { fraction: self.holdout_fraction, seed: self.seed }
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            depth: self.walk_depth,
            walks_per_node: self.walks_per_node,
            strategy: self.walk_strategy,
            seed: self.seed,
        }
    }

    pub fn classifier_spec(&self) -> ClassifierSpec {
        ClassifierSpec {
            kind: self.classifier,
            grid: self.grid.clone(),
            folds: self.folds,
            seed: self.seed,
            standardize: self.standardize,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.split_spec().validate()?;
        self.walk_config().validate()?;
        self.embedding.validate()?;
        self.classifier_spec().validate()?;
        if self.dimension == 0 {
            return Err(EvalError::InvalidConfig("dimension must be positive".into()));
        }
        if let DataSource::Synthetic { synth, .. } = &self.data {
            synth.validate()?;
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Settings that fix the data, split and seeds shared by ablation cells.
    pub(crate) fn shared_key(&self) -> String {
        serde_json::to_string(&(&self.data, self.seed, self.holdout_fraction)).expect("serializes")
    }
}
