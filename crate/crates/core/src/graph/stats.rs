use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Graph, NodeKind, ReferenceRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// `edge_count / node_count`: each edge adds one out-degree and one
    /// in-degree, and the mean of the summed degree is halved.
    pub avg_degree: f64,
    pub kinds: BTreeMap<NodeKind, usize>,
}

pub fn graph_stats(graph: &Graph) -> GraphStats {
    let mut kinds = BTreeMap::new();
    for n in graph.nodes() {
        *kinds.entry(n.kind).or_insert(0) += 1;
    }
    let node_count = graph.node_count();
    let edge_count = graph.edge_count();
    GraphStats {
        node_count,
        edge_count,
        avg_degree: if node_count == 0 {
            0.0
        } else {
            edge_count as f64 / node_count as f64
        },
        kinds,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks referential integrity, reference-range invariants and identifiers.
pub fn validate(graph: &Graph) -> ValidationReport {
    let mut issues = Vec::new();
    for n in graph.nodes() {
        if n.id.is_empty() {
            issues.push("node with empty id".to_string());
        }
        if n.kind == NodeKind::ReferenceRange {
            if let Err(e) = ReferenceRange::from_node(n) {
                issues.push(e.to_string());
            }
        }
    }
    for e in graph.edges() {
        if e.label.is_empty() {
            issues.push(format!("edge {} -> {} has an empty label", e.src, e.dst));
        }
        for end in [e.src, e.dst] {
            if !graph.contains_node(end) {
                issues.push(format!("edge endpoint `{end}` does not resolve"));
            }
        }
    }
    ValidationReport { issues }
}
