//! Skip-gram node embeddings trained with negative sampling.
//!
//! [`train_skipgram`] runs either a deterministic single worker or lock-free
//! parallel workers sharing the weight matrices. Models persist in the
//! word2vec text format.

mod io;
pub mod sgns;
mod train;
mod vocab;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use io::{load_model, read_model, save_model, write_model};
pub use train::{initial_vectors, train_skipgram};
pub use vocab::{build_vocab, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyperparams {
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub noise_exponent: f64,
    /// Single worker with a fixed update order; bit-identical across runs.
    pub deterministic: bool,
    /// Worker count for parallel mode; 0 uses the available cores.
    pub workers: usize,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        TrainHyperparams {
            window: 5,
            epochs: 5,
            negatives: 5,
            learning_rate: 0.025,
            noise_exponent: 0.75,
            deterministic: true,
            workers: 0,
        }
    }
}

impl TrainHyperparams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidHyperparams(m.to_string()));
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.negatives == 0 {
            return bad("negatives must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.noise_exponent.is_finite() && self.noise_exponent > 0.0) {
            return bad("noise_exponent must be positive");
        }
        Ok(())
    }

    /// Lower bound of the linearly decaying learning rate.
    pub fn min_learning_rate(&self) -> f64 {
        self.learning_rate.min(1e-4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    input: Vec<f64>,
    output: Vec<f64>,
    hyperparams: Option<TrainHyperparams>,
    seed: Option<u64>,
    epoch_losses: Vec<f64>,
}

impl EmbeddingModel {
    /// Builds a model from row-major input vectors. Output vectors are zero.
    pub fn from_rows(tokens: Vec<String>, dim: usize, input: Vec<f64>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidDimension(dim));
        }
        assert_eq!(input.len(), tokens.len() * dim, "row count does not match vocabulary");
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let output = vec![0.0; input.len()];
        Ok(EmbeddingModel {
            dim,
            tokens,
            index,
            input,
            output,
            hyperparams: None,
            seed: None,
            epoch_losses: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Result<&[f64], EmbedError> {
        let i = self.index.get(token).ok_or_else(|| EmbedError::UnknownToken(token.to_string()))?;
        Ok(self.row(*i as usize))
    }

    pub fn output_vector(&self, token: &str) -> Result<&[f64], EmbedError> {
        let i = *self.index.get(token).ok_or_else(|| EmbedError::UnknownToken(token.to_string()))? as usize;
        Ok(&self.output[i * self.dim..(i + 1) * self.dim])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, EmbedError> {
        cosine(self.vector(a)?, self.vector(b)?)
    }

    pub fn hyperparams(&self) -> Option<&TrainHyperparams> {
        self.hyperparams.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Expected pair loss on a fixed evaluation sample after each epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    /// SHA-256 over tokens and the exact bits of the input vectors.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (i, t) in self.tokens.iter().enumerate() {
            h.update(t.as_bytes());
            h.update([0]);
            for x in self.row(i) {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    let na = sgns::dot(a, a).sqrt();
    let nb = sgns::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((sgns::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
