use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::{Graph, Triple};
use crate::linkpred::{condition_edges, PairSample, PairSource};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { fraction: 0.25, seed: 0 }
    }
}

impl SplitSpec {
    /// Number of edges held out of `n`: `round(fraction * n)`, kept within `1..n`.
    pub fn test_count(&self, n: usize) -> usize {
        ((self.fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(EvalError::InvalidConfig(format!("holdout fraction {} outside (0, 1)", self.fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    /// Input graph without the held-out condition edges.
    pub train: Graph,
    pub train_positives: Vec<PairSample>,
    pub test_positives: Vec<PairSample>,
    pub held_out: Vec<Triple>,
}

pub const MIN_CONDITION_EDGES: usize = 4;

/// Removes a seeded fraction of the condition edges. Everything downstream
/// (walks, embeddings, training pairs) must be built from `train`.
pub fn holdout_split(graph: &Graph, spec: &SplitSpec) -> Result<HoldoutSplit, EvalError> {
    spec.validate()?;
    let edges = condition_edges(graph);
    if edges.len() < MIN_CONDITION_EDGES {
        return Err(EvalError::TooFewEdges { found: edges.len(), required: MIN_CONDITION_EDGES });
    }
    let mut r = rng::stream(spec.seed, "split/holdout");
    let mut chosen = vec![false; edges.len()];
    for i in sample(&mut r, edges.len(), spec.test_count(edges.len())) {
        chosen[i] = true;
    }
    let (mut held_out, mut kept) = (Vec::new(), Vec::new());
    for (t, test) in edges.into_iter().zip(chosen) {
        if test {
            held_out.push(t);
        } else {
            kept.push(t);
        }
    }
    let mut train = graph.clone();
    train.remove_triples(&held_out);
    let pair = |t: &Triple| PairSample::new(t.src.clone(), t.dst.clone(), PairSource::ExistingEdge);
    Ok(HoldoutSplit {
        train_positives: kept.iter().map(pair).collect(),
        test_positives: held_out.iter().map(pair).collect(),
        held_out,
        train,
    })
}
