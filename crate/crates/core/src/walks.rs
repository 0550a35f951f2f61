//! Random-walk corpora over a frozen graph.
//!
//! Walk tokens alternate node id, edge label, node id, ... A classic walk
//! starts at its origin and only follows outgoing edges. A mid-walk grows a
//! window around its origin: each step prepends an incoming edge at the left
//! end or appends an outgoing edge at the right end, chosen uniformly over
//! both sets, so the origin may end up anywhere in the sequence. Reversed
//! traversals keep the triple orientation, so `src label dst` always reads
//! left to right.
//!
//! `depth` counts edge hops: a walk holds at most `depth + 1` node tokens.
//! Every node draws from its own RNG stream keyed by `(seed, node id)`, so
//! the corpus does not depend on iteration order or scheduling.

use std::collections::{HashSet, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{FrozenGraph, Graph, Triple};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum WalkError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
    #[error("token `{0}` contains whitespace and cannot be written to a corpus")]
    WhitespaceToken(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkStrategy {
    Classic,
    Mid,
}

impl WalkStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            WalkStrategy::Classic => "classic",
            WalkStrategy::Mid => "mid",
        }
    }
}

impl std::str::FromStr for WalkStrategy {
    type Err = WalkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(WalkStrategy::Classic),
            "mid" => Ok(WalkStrategy::Mid),
            other => Err(WalkError::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub depth: usize,
    pub walks_per_node: usize,
    pub strategy: WalkStrategy,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            depth: 4,
            walks_per_node: 100,
            strategy: WalkStrategy::Classic,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.depth == 0 || self.walks_per_node == 0 {
            return Err(WalkError::InvalidConfig(
                "depth and walks_per_node must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub tokens: Vec<String>,
    pub origin: String,
    pub strategy: WalkStrategy,
}

impl Walk {
    pub fn node_tokens(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().step_by(2).map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.tokens.len().div_ceil(2)
    }
}

/// Walk as alternating node / label indices into the graph.
type RawWalk = Vec<u32>;

fn classic_raw(g: &Graph, start: u32, depth: usize, rng: &mut ChaCha8Rng) -> RawWalk {
    let mut walk = Vec::with_capacity(2 * depth + 1);
    walk.push(start);
    let mut cur = start;
    for _ in 0..depth {
        let steps = g.out_steps(cur);
        if steps.is_empty() {
            break;
        }
        let step = steps[rng.gen_range(0..steps.len())];
        walk.push(step.label);
        walk.push(step.node);
        cur = step.node;
    }
    walk
}

fn mid_raw(g: &Graph, origin: u32, depth: usize, rng: &mut ChaCha8Rng) -> RawWalk {
    let mut walk = VecDeque::with_capacity(2 * depth + 1);
    walk.push_back(origin);
    let (mut left, mut right) = (origin, origin);
    for _ in 0..depth {
        let incoming = g.in_steps(left);
        let outgoing = g.out_steps(right);
        let total = incoming.len() + outgoing.len();
        if total == 0 {
            break;
        }
        let k = rng.gen_range(0..total);
        if k < incoming.len() {
            let step = incoming[k];
            walk.push_front(step.label);
            walk.push_front(step.node);
            left = step.node;
        } else {
            let step = outgoing[k - incoming.len()];
            walk.push_back(step.label);
            walk.push_back(step.node);
            right = step.node;
        }
    }
    walk.into()
}

fn node_walks(g: &Graph, origin: u32, config: &WalkConfig) -> Vec<RawWalk> {
    let mut rng = rng::stream(config.seed, &g.node_at(origin).id);
    (0..config.walks_per_node)
        .map(|_| match config.strategy {
            WalkStrategy::Classic => classic_raw(g, origin, config.depth, &mut rng),
            WalkStrategy::Mid => mid_raw(g, origin, config.depth, &mut rng),
        })
        .collect()
}

fn raw_tokens<'g>(g: &'g Graph, raw: &[u32]) -> impl Iterator<Item = &'g str> + 'g {
    let raw = raw.to_vec();
    raw.into_iter().enumerate().map(move |(i, ix)| {
        if i % 2 == 0 {
            g.node_at(ix).id.as_str()
        } else {
            g.label_at(ix)
        }
    })
}

fn walks_from(graph: &FrozenGraph, node: &str, config: &WalkConfig, strategy: WalkStrategy) -> Result<Vec<Walk>, WalkError> {
    config.validate()?;
    let origin = graph
        .node_index(node)
        .ok_or_else(|| WalkError::UnknownNode(node.to_string()))?;
    let config = WalkConfig {
        strategy,
        ..config.clone()
    };
    Ok(node_walks(graph, origin, &config)
        .into_iter()
        .map(|raw| Walk {
            tokens: raw_tokens(graph, &raw).map(str::to_string).collect(),
            origin: node.to_string(),
            strategy,
        })
        .collect())
}

/// `walks_per_node` outgoing-only walks from `start`. `config.strategy` is ignored.
pub fn classic_walks(graph: &FrozenGraph, start: &str, config: &WalkConfig) -> Result<Vec<Walk>, WalkError> {
    walks_from(graph, start, config, WalkStrategy::Classic)
}

/// `walks_per_node` mid-walks around `node`. `config.strategy` is ignored.
pub fn mid_walks(graph: &FrozenGraph, node: &str, config: &WalkConfig) -> Result<Vec<Walk>, WalkError> {
    walks_from(graph, node, config, WalkStrategy::Mid)
}

/// Walk corpus: one space-separated walk per line, grouped by origin in
/// graph node order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub lines: Vec<String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn write_to(&self, out: impl Write) -> Result<(), WalkError> {
        let mut out = BufWriter::new(out);
        for line in &self.lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WalkError> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WalkError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Corpus {
            lines: text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect(),
        })
    }

    /// SHA-256 of the corpus text as written to disk.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for line in &self.lines {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Number of places where a triple appears as three consecutive tokens
    /// `src label dst` at a node-aligned position.
    pub fn count_triples(&self, triples: &[Triple]) -> usize {
        let wanted: HashSet<(&str, &str, &str)> = triples
            .iter()
            .map(|t| (t.src.as_str(), t.label.as_str(), t.dst.as_str()))
            .collect();
        if wanted.is_empty() {
            return 0;
        }
        self.lines
            .par_iter()
            .map(|line| {
                let toks: Vec<&str> = line.split(' ').collect();
                (0..toks.len().saturating_sub(2))
                    .step_by(2)
                    .filter(|&i| wanted.contains(&(toks[i], toks[i + 1], toks[i + 2])))
                    .count()
            })
            .sum()
    }
}

/// `walks_per_node` walks for every node of the graph.
pub fn extract_corpus(graph: &FrozenGraph, config: &WalkConfig) -> Result<Corpus, WalkError> {
    config.validate()?;
    if let Some(bad) = graph
        .nodes()
        .map(|n| n.id.as_str())
        .chain(graph.edges().map(|e| e.label))
        .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
    {
        return Err(WalkError::WhitespaceToken(bad.to_string()));
    }
    let g: &Graph = graph;
    let per_node: Vec<Vec<String>> = (0..g.node_count() as u32)
        .into_par_iter()
        .map(|ix| {
            node_walks(g, ix, config)
                .iter()
                .map(|raw| raw_tokens(g, raw).collect::<Vec<_>>().join(" "))
                .collect()
        })
        .collect();
    Ok(Corpus {
        lines: per_node.into_iter().flatten().collect(),
    })
}
