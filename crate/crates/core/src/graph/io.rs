//! Newline-delimited JSON graph files (`.kgjsonl`).
//!
//! One record per line, discriminated by `record_type`:
//!
//! ```text
//! {"record_type":"node","id":"Rule_Cholestase","kind":"LaboratoryRule","label":"Rule_Cholestase"}
//! {"record_type":"edge","src":"Rule_Cholestase","label":"signals_by","dst":"Bilirubin_total_increased"}
//! ```
//!
//! Nodes are written first in insertion order, then edges. Blank lines are
//! ignored on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, Node, Triple};

#[derive(Serialize, Deserialize)]
#[serde(tag = "record_type", rename_all = "lowercase")]
enum Record {
    Node(Node),
    Edge(Triple),
}

#[derive(Serialize)]
#[serde(tag = "record_type", rename_all = "lowercase")]
enum RecordRef<'a> {
    Node(&'a Node),
    Edge { src: &'a str, label: &'a str, dst: &'a str },
}

pub fn write_graph<W: Write>(graph: &Graph, mut out: W) -> Result<(), GraphError> {
    for node in graph.nodes() {
        serde_json::to_writer(&mut out, &RecordRef::Node(node)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    for e in graph.edges() {
        let rec = RecordRef::Edge {
            src: e.src,
            label: e.label,
            dst: e.dst,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_graph(graph: &Graph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let file = File::create(path)?;
    write_graph(graph, BufWriter::new(file))
}

/// Parses a graph. Edge records may precede the nodes they reference.
pub fn read_graph<R: Read>(input: R) -> Result<Graph, GraphError> {
    let mut graph = Graph::new();
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| GraphError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Node(node) => {
                graph.add_node(node).map_err(|e| GraphError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            }
            Record::Edge(t) => edges.push((line_no, t)),
        }
    }
    for (line_no, t) in edges {
        graph
            .add_edge(&t.src, &t.label, &t.dst)
            .map_err(|e| GraphError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
    }
    Ok(graph)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    read_graph(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cholestasis, NodeKind, Scalar};

    fn round_trip(g: &Graph) -> Graph {
        let mut buf = Vec::new();
        write_graph(g, &mut buf).unwrap();
        read_graph(buf.as_slice()).unwrap()
    }

    #[test]
    fn fixture_round_trip() {
        let g = cholestasis();
        let back = round_trip(&g);
        assert_eq!(back.sorted_triples(), g.sorted_triples());
        let mut a: Vec<_> = g.nodes().cloned().collect();
        let mut b: Vec<_> = back.nodes().cloned().collect();
        a.sort_by(|x, y| x.id.cmp(&y.id));
        b.sort_by(|x, y| x.id.cmp(&y.id));
        assert_eq!(a, b);
    }

    #[test]
    fn empty_file_is_empty_graph() {
        let g = read_graph(&b""[..]).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut buf = Vec::new();
        write_graph(&cholestasis(), &mut buf).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect();
        lines[6] = "{\"record_type\":\"node\",\"id\":".to_string();
        let text = lines.join("\n");
        match read_graph(text.as_bytes()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_is_a_parse_error() {
        let text = r#"{"record_type":"node","id":"A","kind":"Disease","label":"A"}
{"record_type":"edge","src":"A","label":"r","dst":"B"}"#;
        match read_graph(text.as_bytes()) {
            Err(GraphError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown node"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_types_survive() {
        let mut g = Graph::new();
        g.add_node(
            Node::new("X", NodeKind::ReferenceRange)
                .with_property("lower", 3.0)
                .with_property("count", 3i64)
                .with_property("flag", true)
                .with_property("unit", "mg/dl"),
        )
        .unwrap();
        let back = round_trip(&g);
        let props = &back.node("X").unwrap().properties;
        assert_eq!(props["lower"], Scalar::Real(3.0));
        assert_eq!(props["count"], Scalar::Integer(3));
        assert_eq!(props["flag"], Scalar::Bool(true));
        assert_eq!(props["unit"], Scalar::String("mg/dl".into()));
    }

    #[test]
    fn record_field_order_is_stable() {
        let mut g = Graph::new();
        g.add_node(Node::new("A", NodeKind::Disease).with_code("ICD-10", "R17")).unwrap();
        g.add_node(Node::new("B", NodeKind::Finding)).unwrap();
        g.add_edge("A", "r", "B").unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"record_type":"node","id":"A","kind":"Disease","label":"A","codes":{"ICD-10":"R17"}}"#
        );
        assert_eq!(lines[2], r#"{"record_type":"edge","src":"A","label":"r","dst":"B"}"#);
    }
}
