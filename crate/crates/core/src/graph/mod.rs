//! Typed labeled-property graph.
//!
//! Nodes carry a closed [`NodeKind`], optional terminology codes and scalar
//! properties. Edges are directed `(src, label, dst)` triples; a triple can
//! only be stored once. A [`Graph`] is mutable while it is being assembled and
//! is turned into a shareable, read-only [`FrozenGraph`] before walks are
//! extracted from it.

mod fixture;
mod io;
mod kind;
mod range;
mod stats;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fixture::{add_lab_parameter, cholestasis, cholestasis_fragment, POLARITIES};
pub use io::{load_graph, read_graph, save_graph, write_graph};
pub use kind::{NodeKind, UnknownKind};
pub use range::{RangeError, ReferenceRange, Sex, SexApplicability};
pub use stats::{graph_stats, validate, GraphStats, ValidationReport};

/// Edge labels shared by the fixtures, the synthetic generator and ingest.
pub mod labels {
    pub const HAS_RULE: &str = "hasRule";
    pub const SIGNALS_BY: &str = "signals_by";
    pub const HAS_DISEASE: &str = "hasDisease";
    pub const HAS_FINDING: &str = "hasFinding";
    pub const HAS_REFERENCE_RANGE: &str = "hasReferenceRange";
    pub const RANGE_OF: &str = "rangeOf";
    pub const EVALUATES: &str = "evaluates";
    pub const HAS_AGE_GROUP: &str = "hasAgeGroup";
    pub const HAS_SEX: &str = "hasSex";
    pub const OPPOSITE_OF: &str = "oppositeOf";
    pub const MEASURED_IN: &str = "measuredIn";
    pub const AFFECTS: &str = "affects";
}

/// Coding systems recognised on nodes.
pub mod codes {
    pub const ICD10: &str = "ICD-10";
    pub const LOINC: &str = "LOINC";
    pub const SNOMED: &str = "SNOMED";
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate triple ({src}, {label}, {dst})")]
    DuplicateTriple { src: String, label: String, dst: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Property value. Nested structures are not allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Integer(i64),
    Real(f64),
    String(String),
}

impl Scalar {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Real(v) => Some(*v),
            Scalar::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::String(v.to_string())
    }
}

impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::String(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Real(v)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Integer(v)
    }
}

impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub codes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, Scalar>,
}

impl Node {
    /// New node whose display label defaults to its id.
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        let id = id.into();
        Node {
            label: id.clone(),
            id,
            kind,
            codes: BTreeMap::new(),
            properties: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_code(mut self, system: impl Into<String>, code: impl Into<String>) -> Self {
        self.codes.insert(system.into(), code.into());
        self
    }

    pub fn with_property(mut self, key: impl Into<String>, value: impl Into<Scalar>) -> Self {
        self.properties.insert(key.into(), value.into());
        self
    }

    pub fn code(&self, system: &str) -> Option<&str> {
        self.codes.get(system).map(String::as_str)
    }

    pub fn property(&self, key: &str) -> Option<&Scalar> {
        self.properties.get(key)
    }
}

/// Owned `(src, label, dst)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub src: String,
    pub label: String,
    pub dst: String,
}

impl Triple {
    pub fn new(src: impl Into<String>, label: impl Into<String>, dst: impl Into<String>) -> Self {
        Triple {
            src: src.into(),
            label: label.into(),
            dst: dst.into(),
        }
    }
}

/// Borrowed view of a stored edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRef<'g> {
    pub src: &'g str,
    pub label: &'g str,
    pub dst: &'g str,
}

impl EdgeRef<'_> {
    pub fn to_triple(self) -> Triple {
        Triple::new(self.src, self.label, self.dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct EdgeRec {
    src: u32,
    label: u32,
    dst: u32,
}

/// Adjacent step from a node: edge label index and the neighbour's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub label: u32,
    pub node: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    index: HashMap<String, u32>,
    labels: Vec<String>,
    label_index: HashMap<String, u32>,
    edges: Vec<EdgeRec>,
    triples: HashSet<EdgeRec>,
    out_adj: Vec<Vec<Step>>,
    in_adj: Vec<Vec<Step>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> Result<&str, GraphError> {
        if self.index.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        let ix = self.nodes.len() as u32;
        self.index.insert(node.id.clone(), ix);
        self.nodes.push(node);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(&self.nodes[ix as usize].id)
    }

    pub fn add_edge(&mut self, src: &str, label: &str, dst: &str) -> Result<EdgeRef<'_>, GraphError> {
        let s = self.require(src)?;
        let d = self.require(dst)?;
        let l = self.intern_label(label);
        let rec = EdgeRec { src: s, label: l, dst: d };
        if !self.triples.insert(rec) {
            return Err(GraphError::DuplicateTriple {
                src: src.to_string(),
                label: label.to_string(),
                dst: dst.to_string(),
            });
        }
        self.edges.push(rec);
        self.out_adj[s as usize].push(Step { label: l, node: d });
        self.in_adj[d as usize].push(Step { label: l, node: s });
        Ok(self.edge_ref(rec))
    }

    /// Adds the edge unless the triple is already present. Returns whether it was added.
    pub fn ensure_edge(&mut self, src: &str, label: &str, dst: &str) -> Result<bool, GraphError> {
        match self.add_edge(src, label, dst) {
            Ok(_) => Ok(true),
            Err(GraphError::DuplicateTriple { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Removes the given triples, returning how many were present.
    pub fn remove_triples<'a>(&mut self, triples: impl IntoIterator<Item = &'a Triple>) -> usize {
        let mut doomed = HashSet::new();
        for t in triples {
            if let Some(rec) = self.lookup(&t.src, &t.label, &t.dst) {
                doomed.insert(rec);
            }
        }
        if doomed.is_empty() {
            return 0;
        }
        self.edges.retain(|e| !doomed.contains(e));
        for rec in &doomed {
            self.triples.remove(rec);
        }
        for adj in self.out_adj.iter_mut().chain(self.in_adj.iter_mut()) {
            adj.clear();
        }
        for e in &self.edges {
            self.out_adj[e.src as usize].push(Step { label: e.label, node: e.dst });
            self.in_adj[e.dst as usize].push(Step { label: e.label, node: e.src });
        }
        doomed.len()
    }

    pub fn freeze(self) -> FrozenGraph {
        FrozenGraph(Arc::new(self))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&ix| &self.nodes[ix as usize])
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn node_index(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn node_at(&self, ix: u32) -> &Node {
        &self.nodes[ix as usize]
    }

    pub fn label_at(&self, ix: u32) -> &str {
        &self.labels[ix as usize]
    }

    /// Mutable access to the property/code maps of a node. Kind and id stay fixed.
    pub fn properties_mut(&mut self, id: &str) -> Option<&mut BTreeMap<String, Scalar>> {
        let ix = *self.index.get(id)?;
        Some(&mut self.nodes[ix as usize].properties)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeRef<'_>> + '_ {
        self.edges.iter().map(|&e| self.edge_ref(e))
    }

    pub fn out_steps(&self, ix: u32) -> &[Step] {
        &self.out_adj[ix as usize]
    }

    pub fn in_steps(&self, ix: u32) -> &[Step] {
        &self.in_adj[ix as usize]
    }

    pub fn out_edges<'g>(&'g self, id: &str) -> impl Iterator<Item = EdgeRef<'g>> + 'g {
        let ix = self.index.get(id).copied();
        ix.into_iter().flat_map(move |s| {
            self.out_adj[s as usize].iter().map(move |st| EdgeRef {
                src: &self.nodes[s as usize].id,
                label: &self.labels[st.label as usize],
                dst: &self.nodes[st.node as usize].id,
            })
        })
    }

    pub fn in_edges<'g>(&'g self, id: &str) -> impl Iterator<Item = EdgeRef<'g>> + 'g {
        let ix = self.index.get(id).copied();
        ix.into_iter().flat_map(move |d| {
            self.in_adj[d as usize].iter().map(move |st| EdgeRef {
                src: &self.nodes[st.node as usize].id,
                label: &self.labels[st.label as usize],
                dst: &self.nodes[d as usize].id,
            })
        })
    }

    pub fn contains_triple(&self, src: &str, label: &str, dst: &str) -> bool {
        self.lookup(src, label, dst).is_some()
    }

    /// Whether any edge, whatever its label, runs from `src` to `dst`.
    pub fn connected(&self, src: &str, dst: &str) -> bool {
        match (self.index.get(src), self.index.get(dst)) {
            (Some(&s), Some(&d)) => self.out_adj[s as usize].iter().any(|st| st.node == d),
            _ => false,
        }
    }

    /// Sorted list of all triples.
    pub fn sorted_triples(&self) -> Vec<Triple> {
        let mut out: Vec<Triple> = self.edges().map(EdgeRef::to_triple).collect();
        out.sort();
        out
    }

    /// Copy of the graph without nodes of the given kinds (and their edges).
    pub fn without_kinds(&self, kinds: &[NodeKind]) -> Graph {
        let mut g = Graph::new();
        for n in self.nodes.iter().filter(|n| !kinds.contains(&n.kind)) {
            g.add_node(n.clone()).expect("ids unique in source graph");
        }
        for e in self.edges() {
            if g.contains_node(e.src) && g.contains_node(e.dst) {
                g.add_edge(e.src, e.label, e.dst).expect("triples unique in source graph");
            }
        }
        g
    }

    fn require(&self, id: &str) -> Result<u32, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    fn intern_label(&mut self, label: &str) -> u32 {
        if let Some(&ix) = self.label_index.get(label) {
            return ix;
        }
        let ix = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), ix);
        ix
    }

    fn lookup(&self, src: &str, label: &str, dst: &str) -> Option<EdgeRec> {
        let rec = EdgeRec {
            src: *self.index.get(src)?,
            label: *self.label_index.get(label)?,
            dst: *self.index.get(dst)?,
        };
        self.triples.contains(&rec).then_some(rec)
    }

    fn edge_ref(&self, e: EdgeRec) -> EdgeRef<'_> {
        EdgeRef {
            src: &self.nodes[e.src as usize].id,
            label: &self.labels[e.label as usize],
            dst: &self.nodes[e.dst as usize].id,
        }
    }
}

/// Immutable graph that can be shared across threads.
#[derive(Debug, Clone)]
pub struct FrozenGraph(Arc<Graph>);

impl FrozenGraph {
    /// Mutable copy for further editing.
    pub fn thaw(&self) -> Graph {
        (*self.0).clone()
    }
}

impl Deref for FrozenGraph {
    type Target = Graph;

    fn deref(&self) -> &Graph {
        &self.0
    }
}

impl From<Graph> for FrozenGraph {
    fn from(g: Graph) -> Self {
        g.freeze()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_nodes() -> Graph {
        let mut g = Graph::new();
        g.add_node(Node::new("A", NodeKind::Disease)).unwrap();
        g.add_node(Node::new("B", NodeKind::Finding)).unwrap();
        g
    }

    #[test]
    fn add_node_counts_and_rejects_duplicates() {
        let mut g = Graph::new();
        g.add_node(Node::new("Cholestasis", NodeKind::Disease)).unwrap();
        assert_eq!(g.node_count(), 1);
        let err = g.add_node(Node::new("Cholestasis", NodeKind::Finding)).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateId(id) if id == "Cholestasis"));
        assert_eq!(g.node("Cholestasis").unwrap().kind, NodeKind::Disease);
    }

    #[test]
    fn add_edge_errors() {
        let mut g = two_nodes();
        g.add_edge("A", "r", "B").unwrap();
        assert!(matches!(g.add_edge("A", "r", "Z"), Err(GraphError::UnknownNode(id)) if id == "Z"));
        assert!(matches!(g.add_edge("A", "r", "B"), Err(GraphError::DuplicateTriple { .. })));
        // same endpoints, different label is a distinct triple
        g.add_edge("A", "s", "B").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.connected("A", "B"));
        assert!(!g.connected("B", "A"));
    }

    #[test]
    fn remove_triples_rebuilds_adjacency() {
        let mut g = two_nodes();
        g.add_edge("A", "r", "B").unwrap();
        g.add_edge("B", "s", "A").unwrap();
        let removed = g.remove_triples(&[Triple::new("A", "r", "B"), Triple::new("A", "zz", "B")]);
        assert_eq!(removed, 1);
        assert_eq!(g.edge_count(), 1);
        assert!(!g.contains_triple("A", "r", "B"));
        assert_eq!(g.out_edges("A").count(), 0);
        assert_eq!(g.in_edges("A").count(), 1);
        // removed triple can be added again
        g.add_edge("A", "r", "B").unwrap();
    }

    #[test]
    fn without_kinds_drops_incident_edges() {
        let mut g = two_nodes();
        g.add_node(Node::new("P1", NodeKind::Patient)).unwrap();
        g.add_edge("P1", labels::HAS_DISEASE, "A").unwrap();
        g.add_edge("A", "r", "B").unwrap();
        let base = g.without_kinds(&[NodeKind::Patient]);
        assert_eq!(base.node_count(), 2);
        assert_eq!(base.sorted_triples(), vec![Triple::new("A", "r", "B")]);
    }

    #[test]
    fn frozen_graph_is_shareable() {
        let g = two_nodes().freeze();
        let g2 = g.clone();
        std::thread::spawn(move || assert_eq!(g2.node_count(), 2))
            .join()
            .unwrap();
        let mut thawed = g.thaw();
        thawed.add_edge("A", "r", "B").unwrap();
        assert_eq!(g.edge_count(), 0);
    }
}
