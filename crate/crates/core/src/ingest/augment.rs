use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{aggregate_levels, select_range, EvaluatedFinding};
use super::{IngestError, PatientRecord};
use crate::graph::{codes, labels, FrozenGraph, Graph, Node, NodeKind, ReferenceRange, Scalar, Sex};

/// Lookup tables from terminology codes into a curated graph.
#[derive(Debug, Clone, Default)]
pub struct GraphIndex {
    diseases_by_icd: HashMap<String, Vec<String>>,
    parameter_by_loinc: HashMap<String, String>,
    ranges: HashMap<String, Vec<ReferenceRange>>,
    /// `(parameter, level)` to the node already representing it.
    level_nodes: HashMap<(String, String), String>,
}

impl GraphIndex {
    pub fn build(graph: &Graph) -> Self {
        let mut index = GraphIndex::default();
        for node in graph.nodes() {
            match node.kind {
                NodeKind::Disease => {
                    if let Some(code) = node.code(codes::ICD10) {
                        index
                            .diseases_by_icd
                            .entry(code.to_string())
                            .or_default()
                            .push(node.id.clone());
                    }
                }
                NodeKind::Parameter => {
                    if let Some(code) = node.code(codes::LOINC) {
                        index.parameter_by_loinc.insert(code.to_string(), node.id.clone());
                    }
                }
                NodeKind::ReferenceRange => {
                    if let Ok(range) = ReferenceRange::from_node(node) {
                        index.ranges.entry(range.parameter.clone()).or_default().push(range);
                    }
                }
                _ => {}
            }
            let param = node.property("parameter").and_then(Scalar::as_str);
            let level = node.property("level").and_then(Scalar::as_str);
            if let (Some(p), Some(l)) = (param, level) {
                index
                    .level_nodes
                    .entry((p.to_string(), l.to_string()))
                    .or_insert_with(|| node.id.clone());
            }
        }
        index
    }

    pub fn diseases_for(&self, icd: &str) -> &[String] {
        self.diseases_by_icd.get(icd).map_or(&[], Vec::as_slice)
    }

    pub fn parameter_for(&self, loinc: &str) -> Option<&str> {
        self.parameter_by_loinc.get(loinc).map(String::as_str)
    }

    pub fn ranges_for(&self, parameter: &str) -> &[ReferenceRange] {
        self.ranges.get(parameter).map_or(&[], Vec::as_slice)
    }

    fn level_node(&self, parameter: &str, level: &str) -> Option<&str> {
        self.level_nodes
            .get(&(parameter.to_string(), level.to_string()))
            .map(String::as_str)
    }
}

/// Per-patient result of matching codes and evaluating measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPatient {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    pub diseases: Vec<String>,
    pub findings: Vec<EvaluatedFinding>,
    pub unmatched_diagnoses: usize,
    pub unmatched_measurements: usize,
    pub unit_mismatches: usize,
    pub no_applicable_range: usize,
}

impl EvaluatedPatient {
    pub fn is_empty(&self) -> bool {
        self.diseases.is_empty() && self.findings.is_empty()
    }
}

pub fn evaluate_patient(index: &GraphIndex, record: &PatientRecord) -> EvaluatedPatient {
    let mut out = EvaluatedPatient {
        id: record.id.clone(),
        age: record.age,
        sex: record.sex,
        diseases: Vec::new(),
        findings: Vec::new(),
        unmatched_diagnoses: 0,
        unmatched_measurements: 0,
        unit_mismatches: 0,
        no_applicable_range: 0,
    };
    for code in &record.diagnoses {
        let matched = index.diseases_for(code);
        if matched.is_empty() {
            out.unmatched_diagnoses += 1;
        }
        for d in matched {
            if !out.diseases.contains(d) {
                out.diseases.push(d.clone());
            }
        }
    }

    // group by parameter, keeping first-seen order
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&super::LabMeasurement>> = HashMap::new();
    for m in &record.measurements {
        let Some(param) = index.parameter_for(&m.loinc) else {
            out.unmatched_measurements += 1;
            continue;
        };
        grouped
            .entry(param)
            .or_insert_with(|| {
                order.push(param);
                Vec::new()
            })
            .push(m);
    }
    for param in order {
        let range = match select_range(index.ranges_for(param), param, record.sex, record.age) {
            Ok(r) => r,
            Err(_) => {
                out.no_applicable_range += 1;
                continue;
            }
        };
        let mut values = Vec::new();
        for m in &grouped[param] {
            match super::evaluate_measurement(m, range) {
                Ok(_) => values.push(m.value),
                Err(IngestError::UnitMismatch { .. }) => out.unit_mismatches += 1,
                Err(_) => {}
            }
        }
        if let Some((_, level)) = aggregate_levels(&values, range) {
            out.findings.push(EvaluatedFinding::new(param, level));
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub patients_total: usize,
    pub patients_added: usize,
    pub patients_skipped: usize,
    pub nodes_added: usize,
    pub edges_added: usize,
    pub findings: usize,
    pub unmatched_diagnoses: usize,
    pub unmatched_measurements: usize,
    pub unit_mismatches: usize,
    pub no_applicable_range: usize,
}

#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    pub graph: Graph,
    pub report: AugmentReport,
}

/// Decade bucket node id for an age in years.
pub fn age_group(age: f64) -> String {
    let lo = ((age.max(0.0) / 10.0).floor() as u32) * 10;
    if lo >= 90 {
        "AgeGroup_90_plus".to_string()
    } else {
        format!("AgeGroup_{}_{}", lo, lo + 9)
    }
}

pub fn sex_node(sex: Sex) -> String {
    format!("Sex_{}", sex.as_str())
}

pub fn patient_node(id: &str) -> String {
    format!("Patient_{id}")
}

fn ensure_node(g: &mut Graph, node: Node) {
    if !g.contains_node(&node.id) {
        g.add_node(node).expect("checked absent");
    }
}

/// Node for `(parameter, level)`: an existing condition node when the
/// curated graph already has one, otherwise a new `EvaluatedParameter`.
fn finding_node(g: &mut Graph, index: &GraphIndex, parameter: &str, level: &str) -> String {
    if let Some(existing) = index.level_node(parameter, level) {
        return existing.to_string();
    }
    let id = format!("{parameter}_{level}");
    if !g.contains_node(&id) {
        g.add_node(
            Node::new(&id, NodeKind::EvaluatedParameter)
                .with_property("parameter", parameter)
                .with_property("level", level),
        )
        .expect("checked absent");
        g.add_edge(&id, labels::EVALUATES, parameter).expect("parameter exists");
    }
    id
}

/// Merges evaluated patients into a copy of `kg`. The curated graph itself
/// is never modified. Patients without any matching disease or parameter
/// are skipped and counted.
pub fn augment_graph(kg: &FrozenGraph, records: &[PatientRecord]) -> AugmentedGraph {
    let index = GraphIndex::build(kg);
    let evaluated: Vec<EvaluatedPatient> = records.par_iter().map(|r| evaluate_patient(&index, r)).collect();

    let mut g = kg.thaw();
    let (nodes_before, edges_before) = (g.node_count(), g.edge_count());
    let mut report = AugmentReport {
        patients_total: records.len(),
        ..AugmentReport::default()
    };
    let mut seen = HashSet::new();
    for p in &evaluated {
        report.unmatched_diagnoses += p.unmatched_diagnoses;
        report.unmatched_measurements += p.unmatched_measurements;
        report.unit_mismatches += p.unit_mismatches;
        report.no_applicable_range += p.no_applicable_range;
        let pid = patient_node(&p.id);
        if p.is_empty() || !seen.insert(pid.clone()) || g.contains_node(&pid) {
            report.patients_skipped += 1;
            continue;
        }
        g.add_node(
            Node::new(&pid, NodeKind::Patient)
                .with_property("age", p.age)
                .with_property("sex", p.sex.as_str()),
        )
        .expect("checked absent");
        report.patients_added += 1;

        let age = age_group(p.age);
        ensure_node(&mut g, Node::new(&age, NodeKind::PatientBaseData));
        g.ensure_edge(&pid, labels::HAS_AGE_GROUP, &age).expect("nodes exist");
        let sex = sex_node(p.sex);
        ensure_node(&mut g, Node::new(&sex, NodeKind::PatientBaseData));
        g.ensure_edge(&pid, labels::HAS_SEX, &sex).expect("nodes exist");

        for d in &p.diseases {
            g.ensure_edge(&pid, labels::HAS_DISEASE, d).expect("disease from index");
        }
        for f in &p.findings {
            report.findings += 1;
            let level = finding_node(&mut g, &index, &f.parameter, f.level.as_str());
            g.ensure_edge(&pid, labels::HAS_FINDING, &level).expect("nodes exist");
            for c in &f.derived {
                let id = finding_node(&mut g, &index, &f.parameter, c.as_str());
                g.ensure_edge(&pid, labels::HAS_FINDING, &id).expect("nodes exist");
            }
        }
    }
    report.nodes_added = g.node_count() - nodes_before;
    report.edges_added = g.edge_count() - edges_before;
    AugmentedGraph { graph: g, report }
}
