//! Knowledge-graph refinement toolkit.
//!
//! The pipeline augments a curated medical graph with evaluated patient
//! records ([`ingest`]), extracts random-walk corpora ([`walks`]), trains
//! skip-gram node embeddings ([`embedding`]), predicts missing rule to
//! risk-factor relations ([`linkpred`]) and measures the result under a
//! leakage-safe holdout protocol ([`eval`]).

pub mod embedding;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod linkpred;
pub mod rng;
pub mod walks;
