//! Planted-edge benchmark: a synthetic curated graph plus a patient cohort
//! whose lab values are driven by the planted rule conditions.
//!
//! Every disease owns `rules_per_disease` laboratory rules, each signalled by
//! `conditions_per_rule` polarity conditions (`Param_007_increased`, ...).
//! A patient of disease `d` shows each of `d`'s planted conditions with
//! probability `p_signal`; any other measured parameter is abnormal with
//! probability `p_noise`. The ledger records the ground truth and the exact
//! counts the downstream stages must reproduce.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{age_group, sex_node};
use super::{consequence_closure, parse_patient_tables, IngestError, NominalLevel, PatientRecord};
use crate::graph::{self, add_lab_parameter, codes, labels, write_graph, Graph, Node, NodeKind, ReferenceRange, Sex};
use crate::rng;

const UNITS: [&str; 4] = ["U/l", "mg/dl", "mmol/l", "g/l"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub diseases: usize,
    pub rules_per_disease: usize,
    pub conditions_per_rule: usize,
    /// Size of the lab parameter pool. Diseases share parameters only once
    /// every parameter has been used; each parameter has one pathological
    /// direction used by every disease that references it.
    pub parameters: usize,
    pub patients: usize,
    pub p_signal: f64,
    pub p_noise: f64,
    /// Chance that a parameter unrelated to the patient's disease is measured.
    pub measure_probability: f64,
    /// Fraction of planted condition edges left out of the emitted graph.
    pub withheld_fraction: f64,
    pub organs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            diseases: 30,
            rules_per_disease: 2,
            conditions_per_rule: 3,
            parameters: 90,
            patients: 500,
            p_signal: 0.9,
            p_noise: 0.05,
            measure_probability: 0.1,
            withheld_fraction: 0.0,
            organs: 6,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidConfig(m.to_string()));
        if self.diseases == 0 || self.rules_per_disease == 0 || self.conditions_per_rule == 0 {
            return bad("diseases, rules_per_disease and conditions_per_rule must be positive");
        }
        if self.rules_per_disease * self.conditions_per_rule > self.parameters {
            return bad("each disease needs rules_per_disease * conditions_per_rule distinct parameters");
        }
        if self.diseases >= 1000 || self.parameters >= 10_000 {
            return bad("at most 999 diseases and 9999 parameters");
        }
        for (name, p) in [
            ("p_signal", self.p_signal),
            ("p_noise", self.p_noise),
            ("measure_probability", self.measure_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.withheld_fraction) {
            return bad("withheld_fraction must lie in [0, 1)");
        }
        if self.organs == 0 {
            return bad("organs must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub disease: String,
    pub rule: String,
    pub factor: String,
    pub withheld: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthCounts {
    pub kg_nodes: usize,
    pub kg_edges: usize,
    pub diseases: usize,
    pub rules: usize,
    pub parameters: usize,
    pub planted_edges: usize,
    pub emitted_condition_edges: usize,
    pub withheld_edges: usize,
    pub patients: usize,
    pub diagnosis_rows: usize,
    pub lab_rows: usize,
}

/// What merging the whole cohort into the emitted graph must produce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedAugmentation {
    pub patients_added: usize,
    pub patients_skipped: usize,
    pub nodes_added: usize,
    pub edges_added: usize,
    pub findings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLedger {
    pub seed: u64,
    pub config: SynthConfig,
    pub planted: Vec<PlantedEdge>,
    pub counts: SynthCounts,
    pub augmentation: ExpectedAugmentation,
}

impl SynthLedger {
    pub fn withheld(&self) -> impl Iterator<Item = &PlantedEdge> + '_ {
        self.planted.iter().filter(|e| e.withheld)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub kg: Graph,
    pub patients_csv: String,
    pub diagnoses_csv: String,
    pub labs_csv: String,
    pub ledger: SynthLedger,
}

impl SynthOutput {
    pub fn records(&self) -> Result<Vec<PatientRecord>, IngestError> {
        parse_patient_tables(
            self.patients_csv.as_bytes(),
            self.diagnoses_csv.as_bytes(),
            self.labs_csv.as_bytes(),
        )
    }

    /// Writes `kg.kgjsonl`, `patients.csv`, `diagnoses.csv`, `labevents.csv` and `ledger.json`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<(), IngestError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut kg = Vec::new();
        write_graph(&self.kg, &mut kg).map_err(|e| match e {
            graph::GraphError::Io(io) => IngestError::Io(io),
            other => IngestError::Io(std::io::Error::other(other.to_string())),
        })?;
        fs::write(dir.join("kg.kgjsonl"), kg)?;
        fs::write(dir.join("patients.csv"), &self.patients_csv)?;
        fs::write(dir.join("diagnoses.csv"), &self.diagnoses_csv)?;
        fs::write(dir.join("labevents.csv"), &self.labs_csv)?;
        let ledger = serde_json::to_string_pretty(&self.ledger).map_err(std::io::Error::from)?;
        fs::write(dir.join("ledger.json"), ledger)?;
        Ok(())
    }
}

pub fn parameter_id(p: usize) -> String {
    format!("Param_{p:03}")
}

pub fn disease_id(d: usize) -> String {
    format!("Disease_{d:03}")
}

pub fn disease_icd(d: usize) -> String {
    format!("Q{:02}.{}", d / 10, d % 10)
}

pub fn rule_id(d: usize, r: usize) -> String {
    format!("Rule_{d:03}_{r}")
}

struct Param {
    id: String,
    loinc: String,
    unit: &'static str,
    lower: f64,
    upper: f64,
}

impl Param {
    fn sample_value(&self, level: NominalLevel, rng: &mut impl Rng) -> f64 {
        let width = self.upper - self.lower;
        let v = match level {
            NominalLevel::Normal => rng.gen_range(self.lower + 0.05 * width..self.upper - 0.05 * width),
            NominalLevel::Increased => self.upper + width * rng.gen_range(0.1..1.0),
            NominalLevel::Decreased => self.lower * rng.gen_range(0.1..0.9),
        };
        (v * 1000.0).round() / 1000.0
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

pub fn generate_synthetic_cohort(config: &SynthConfig, seed: u64) -> Result<SynthOutput, IngestError> {
    config.validate()?;
    let mut structure_rng = rng::stream(seed, "synth/structure");
    let mut g = Graph::new();
    let built = |e: graph::GraphError| IngestError::InvalidConfig(format!("generator produced an invalid graph: {e}"));

    let mut params = Vec::with_capacity(config.parameters);
    for p in 0..config.parameters {
        let lower = round1(structure_rng.gen_range(1.0..50.0));
        let upper = round1(lower * structure_rng.gen_range(1.5..4.0));
        let param = Param {
            id: parameter_id(p),
            loinc: format!("{}-{}", 90_000 + p, p % 10),
            unit: UNITS[p % UNITS.len()],
            lower,
            upper,
        };
        let range = ReferenceRange::new(&param.id, Some(lower), Some(upper), param.unit).map_err(|e| {
            IngestError::InvalidConfig(e.to_string())
        })?;
        add_lab_parameter(&mut g, &param.id, &param.loinc, &range).map_err(built)?;
        params.push(param);
    }
    for o in 0..config.organs {
        g.add_node(Node::new(format!("Organ_{o}"), NodeKind::Organ)).map_err(built)?;
    }

    // per disease: (parameter index, polarity) for every planted condition.
    // Parameters are dealt from one shuffled deck, so no parameter serves two
    // diseases until the pool is exhausted.
    let per_disease = config.rules_per_disease * config.conditions_per_rule;
    let mut deck: Vec<usize> = (0..config.parameters).collect();
    deck.shuffle(&mut structure_rng);
    let direction: Vec<NominalLevel> = (0..config.parameters)
        .map(|_| {
            if structure_rng.gen_bool(0.5) {
                NominalLevel::Increased
            } else {
                NominalLevel::Decreased
            }
        })
        .collect();
    let mut disease_conditions: Vec<Vec<(usize, NominalLevel)>> = Vec::with_capacity(config.diseases);
    let mut planted = Vec::new();
    for d in 0..config.diseases {
        let did = disease_id(d);
        g.add_node(Node::new(&did, NodeKind::Disease).with_code(codes::ICD10, disease_icd(d)))
            .map_err(built)?;
        let organ = format!("Organ_{}", structure_rng.gen_range(0..config.organs));
        g.add_edge(&did, labels::AFFECTS, &organ).map_err(built)?;
        let chosen: Vec<usize> = (0..per_disease).map(|s| deck[(d * per_disease + s) % deck.len()]).collect();
        let mut conditions = Vec::with_capacity(per_disease);
        for (slot, &p) in chosen.iter().enumerate() {
            let level = direction[p];
            conditions.push((p, level));
            let r = slot / config.conditions_per_rule;
            planted.push(PlantedEdge {
                disease: did.clone(),
                rule: rule_id(d, r),
                factor: format!("{}_{}", params[p].id, level.as_str()),
                withheld: false,
            });
        }
        for r in 0..config.rules_per_disease {
            let rid = rule_id(d, r);
            g.add_node(Node::new(&rid, NodeKind::LaboratoryRule)).map_err(built)?;
            g.add_edge(&did, labels::HAS_RULE, &rid).map_err(built)?;
        }
        disease_conditions.push(conditions);
    }
    let withheld_count = (config.withheld_fraction * planted.len() as f64).round() as usize;
    for i in sample(&mut structure_rng, planted.len(), withheld_count) {
        planted[i].withheld = true;
    }
    for e in planted.iter().filter(|e| !e.withheld) {
        g.add_edge(&e.rule, labels::SIGNALS_BY, &e.factor).map_err(built)?;
    }

    // cohort
    let mut cohort_rng = rng::stream(seed, "synth/cohort");
    let mut patients_csv = String::from("subject_id,anchor_age,gender\n");
    let mut diagnoses_csv = String::from("subject_id,icd_code\n");
    let mut labs_csv = String::from("subject_id,loinc_code,valuenum,valueuom\n");
    let mut lab_rows = 0;
    let mut expected = ExpectedAugmentation::default();
    let mut created_nodes: BTreeSet<String> = BTreeSet::new();
    let mut created_eval_nodes = 0usize;
    for i in 0..config.patients {
        let subject = format!("{}", 10_000 + i);
        let d = cohort_rng.gen_range(0..config.diseases);
        let age: u32 = cohort_rng.gen_range(18..=90);
        let sex = if cohort_rng.gen_bool(0.5) { Sex::Male } else { Sex::Female };
        let _ = writeln!(
            patients_csv,
            "{subject},{age},{}",
            if sex == Sex::Male { "M" } else { "F" }
        );
        let _ = writeln!(diagnoses_csv, "{subject},{}", disease_icd(d));

        let mut measured = 0;
        for (p, param) in params.iter().enumerate() {
            let planted_level = disease_conditions[d].iter().find(|(q, _)| *q == p).map(|&(_, l)| l);
            let level = match planted_level {
                Some(l) => {
                    if cohort_rng.gen_bool(config.p_signal) {
                        l
                    } else {
                        NominalLevel::Normal
                    }
                }
                None => {
                    if !cohort_rng.gen_bool(config.measure_probability) {
                        continue;
                    }
                    if cohort_rng.gen_bool(config.p_noise) {
                        if cohort_rng.gen_bool(0.5) {
                            NominalLevel::Increased
                        } else {
                            NominalLevel::Decreased
                        }
                    } else {
                        NominalLevel::Normal
                    }
                }
            };
            let value = param.sample_value(level, &mut cohort_rng);
            let _ = writeln!(labs_csv, "{subject},{},{value},{}", param.loinc, param.unit);
            lab_rows += 1;
            measured += 1;
            // abnormal levels reuse the curated polarity nodes; everything else is new
            let mut new_ids = consequence_closure(level)
                .into_iter()
                .map(|c| format!("{}_{}", param.id, c.as_str()))
                .collect::<Vec<_>>();
            if level == NominalLevel::Normal {
                new_ids.push(format!("{}_normal", param.id));
            }
            for id in new_ids {
                if created_nodes.insert(id) {
                    created_eval_nodes += 1;
                }
            }
        }
        created_nodes.insert(age_group(age as f64));
        created_nodes.insert(sex_node(sex));
        expected.patients_added += 1;
        expected.findings += measured;
        // hasDisease + hasAgeGroup + hasSex + (level + 2 consequences) per parameter
        expected.edges_added += 3 + 3 * measured;
    }
    expected.nodes_added = expected.patients_added + created_nodes.len();
    expected.edges_added += created_eval_nodes;

    let counts = SynthCounts {
        kg_nodes: g.node_count(),
        kg_edges: g.edge_count(),
        diseases: config.diseases,
        rules: config.diseases * config.rules_per_disease,
        parameters: config.parameters,
        planted_edges: planted.len(),
        emitted_condition_edges: planted.len() - withheld_count,
        withheld_edges: withheld_count,
        patients: config.patients,
        diagnosis_rows: config.patients,
        lab_rows,
    };
    Ok(SynthOutput {
        kg: g,
        patients_csv,
        diagnoses_csv,
        labs_csv,
        ledger: SynthLedger {
            seed,
            config: config.clone(),
            planted,
            counts,
            augmentation: expected,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_stats;
    use crate::ingest::augment_graph;

    fn small() -> SynthConfig {
        SynthConfig {
            diseases: 6,
            parameters: 15,
            patients: 60,
            ..SynthConfig::default()
        }
    }

    fn serialized(out: &SynthOutput) -> Vec<u8> {
        let mut buf = Vec::new();
        write_graph(&out.kg, &mut buf).unwrap();
        buf.extend_from_slice(out.patients_csv.as_bytes());
        buf.extend_from_slice(out.diagnoses_csv.as_bytes());
        buf.extend_from_slice(out.labs_csv.as_bytes());
        buf.extend_from_slice(serde_json::to_string(&out.ledger).unwrap().as_bytes());
        buf
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_synthetic_cohort(&small(), 7).unwrap();
        let b = generate_synthetic_cohort(&small(), 7).unwrap();
        assert_eq!(serialized(&a), serialized(&b));
        let c = generate_synthetic_cohort(&small(), 8).unwrap();
        assert_ne!(serialized(&a), serialized(&c));
    }

    #[test]
    fn invalid_configs() {
        let too_many = SynthConfig {
            parameters: 5,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic_cohort(&too_many, 1), Err(IngestError::InvalidConfig(_))));
        let bad_p = SynthConfig {
            p_signal: 1.5,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic_cohort(&bad_p, 1), Err(IngestError::InvalidConfig(_))));
    }

    #[test]
    fn ledger_counts_match_emitted() {
        let cfg = SynthConfig {
            withheld_fraction: 0.2,
            ..small()
        };
        let out = generate_synthetic_cohort(&cfg, 3).unwrap();
        let stats = graph_stats(&out.kg);
        assert_eq!(stats.node_count, out.ledger.counts.kg_nodes);
        assert_eq!(stats.edge_count, out.ledger.counts.kg_edges);
        let condition_edges = out.kg.edges().filter(|e| e.label == labels::SIGNALS_BY).count();
        assert_eq!(condition_edges, out.ledger.counts.emitted_condition_edges);
        assert_eq!(out.ledger.withheld().count(), out.ledger.counts.withheld_edges);
        for e in out.ledger.withheld() {
            assert!(!out.kg.contains_triple(&e.rule, labels::SIGNALS_BY, &e.factor));
        }
        let recs = out.records().unwrap();
        assert_eq!(recs.len(), cfg.patients);
        let labs: usize = recs.iter().map(|r| r.measurements.len()).sum();
        assert_eq!(labs, out.ledger.counts.lab_rows);
    }

    #[test]
    fn augmentation_matches_ledger() {
        let out = generate_synthetic_cohort(&small(), 11).unwrap();
        let kg = out.kg.clone().freeze();
        let aug = augment_graph(&kg, &out.records().unwrap());
        let want = &out.ledger.augmentation;
        assert_eq!(aug.report.patients_added, want.patients_added);
        assert_eq!(aug.report.patients_skipped, want.patients_skipped);
        assert_eq!(aug.report.nodes_added, want.nodes_added);
        assert_eq!(aug.report.edges_added, want.edges_added);
        assert_eq!(aug.report.findings, want.findings);
    }

    #[test]
    fn degenerate_signal_config() {
        let cfg = SynthConfig {
            p_signal: 1.0,
            p_noise: 0.0,
            ..small()
        };
        let out = generate_synthetic_cohort(&cfg, 5).unwrap();
        let kg = out.kg.clone().freeze();
        let index = crate::ingest::GraphIndex::build(&kg);
        for rec in out.records().unwrap() {
            let d = (0..cfg.diseases).find(|&d| disease_icd(d) == rec.diagnoses[0]).unwrap();
            let did = disease_id(d);
            let want: BTreeSet<String> = out
                .ledger
                .planted
                .iter()
                .filter(|e| e.disease == did)
                .map(|e| e.factor.clone())
                .collect();
            let ev = crate::ingest::evaluate_patient(&index, &rec);
            let got: BTreeSet<String> = ev
                .findings
                .iter()
                .filter(|f| f.level.is_abnormal())
                .map(|f| f.level_id())
                .collect();
            assert_eq!(got, want, "patient {}", rec.id);
        }
    }
}
