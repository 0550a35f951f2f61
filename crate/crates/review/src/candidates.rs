use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use kgrefine_core::embedding::EmbeddingModel;
use kgrefine_core::graph::{labels, Graph, NodeKind};
use kgrefine_core::linkpred::{featurize, SamplingUniverse, TrainedClassifier};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ReviewError;

pub const DEFAULT_MIN_EVALUATIONS: usize = 5;

/// Disease label for rules that no disease references.
pub const UNASSIGNED_DISEASE: &str = "unassigned";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub rule: String,
    pub factor: String,
    pub disease: String,
    pub score: f64,
    /// Patients with the factor among their findings and the rule's disease
    /// among their diagnoses.
    pub supporting_patients: usize,
    /// Patients with any finding on the factor's parameter.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateOptions {
    pub min_evaluations: usize,
    /// Disease ids or labels to keep; `None` keeps every disease.
    pub diseases: Option<BTreeSet<String>>,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions { min_evaluations: DEFAULT_MIN_EVALUATIONS, diseases: None }
    }
}

/// Candidates of one model, as written to and read from a candidate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub model_fingerprint: String,
    pub options: CandidateOptions,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn get(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn validate(&self) -> Result<(), ReviewError> {
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(ReviewError::InvalidCandidates(format!("duplicate id `{}`", c.id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReviewError> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let set: CandidateSet = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        set.validate()?;
        Ok(set)
    }
}

/// Stable id of the pair under one model: the first 16 hex digits of
/// SHA-256 over the rule, factor and model fingerprint.
pub fn candidate_id(rule: &str, factor: &str, model_fingerprint: &str) -> String {
    let mut h = Sha256::new();
    for part in [rule, factor, model_fingerprint] {
        h.update(part.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())[..16].to_string()
}

/// Parameter a finding or condition node refers to, if any.
fn parameter_of<'g>(graph: &'g Graph, id: &'g str) -> Option<&'g str> {
    let node = graph.node(id)?;
    if node.kind == NodeKind::Parameter {
        return Some(&node.id);
    }
    if let Some(p) = node.property("parameter").and_then(|p| p.as_str()) {
        return Some(p);
    }
    graph
        .out_edges(id)
        .find(|e| e.label == labels::RANGE_OF || e.label == labels::EVALUATES)
        .map(|e| e.dst)
}

/// Key under which evaluations of a factor are counted: its parameter, or
/// the factor itself when it has none.
fn evaluation_key<'g>(graph: &'g Graph, factor: &'g str) -> &'g str {
    parameter_of(graph, factor).unwrap_or(factor)
}

/// Number of distinct patients with at least one finding per evaluation key.
pub fn evaluation_counts(graph: &Graph) -> BTreeMap<String, usize> {
    let mut patients: HashMap<&str, HashSet<&str>> = HashMap::new();
    for p in graph.nodes_of_kind(NodeKind::Patient) {
        for e in graph.out_edges(&p.id).filter(|e| e.label == labels::HAS_FINDING) {
            patients.entry(evaluation_key(graph, e.dst)).or_default().insert(e.src);
        }
    }
    patients.into_iter().map(|(k, v)| (k.to_string(), v.len())).collect()
}

fn patients_via<'g>(graph: &'g Graph, target: &str, label: &str) -> HashSet<&'g str> {
    graph
        .in_edges(target)
        .filter(|e| e.label == label)
        .filter(|e| graph.node(e.src).is_some_and(|n| n.kind == NodeKind::Patient))
        .map(|e| e.src)
        .collect()
}

fn rule_diseases<'g>(graph: &'g Graph, rule: &str) -> Vec<&'g str> {
    let mut ids: Vec<&str> = graph
        .in_edges(rule)
        .filter(|e| e.label == labels::HAS_RULE)
        .filter(|e| graph.node(e.src).is_some_and(|n| n.kind == NodeKind::Disease))
        .map(|e| e.src)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Every rule and factor pair absent from `graph` that the classifier
/// labels positive and whose factor has at least `min_evaluations`
/// evaluations, best score first. Pairs the model has no vectors for are
/// skipped.
pub fn generate_candidates(
    graph: &Graph,
    model: &EmbeddingModel,
    classifier: &TrainedClassifier,
    options: &CandidateOptions,
) -> Result<CandidateSet, ReviewError> {
    let fingerprint = model.digest();
    let universe = SamplingUniverse::from_graph(graph);
    let evaluations = evaluation_counts(graph);
    let mut finding_patients: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut disease_patients: HashMap<&str, HashSet<&str>> = HashMap::new();

    let mut candidates = Vec::new();
    for rule in universe.rules.iter().filter(|r| model.contains(r)) {
        let diseases = rule_diseases(graph, rule);
        if let Some(keep) = &options.diseases {
            let matches = diseases.iter().any(|d| {
                keep.contains(*d) || graph.node(d).is_some_and(|n| keep.contains(&n.label))
            });
            if !matches {
                continue;
            }
        }
        let disease = diseases
            .first()
            .and_then(|d| graph.node(d))
            .map_or_else(|| UNASSIGNED_DISEASE.to_string(), |n| n.label.clone());

        for factor in universe.factors.iter().filter(|f| model.contains(f)) {
            if graph.contains_triple(rule, labels::SIGNALS_BY, factor) {
                continue;
            }
            let evaluated = evaluations.get(evaluation_key(graph, factor)).copied().unwrap_or(0);
            if evaluated < options.min_evaluations {
                continue;
            }
            let score = classifier.score(&featurize(model, rule, factor)?)?;
            if score < 0.5 {
                continue;
            }
            let with_factor = finding_patients
                .entry(factor.as_str())
                .or_insert_with(|| patients_via(graph, factor, labels::HAS_FINDING));
            let mut supporting = HashSet::new();
            for d in &diseases {
                let sick = disease_patients.entry(d).or_insert_with(|| patients_via(graph, d, labels::HAS_DISEASE));
                supporting.extend(with_factor.intersection(sick).copied());
            }
            candidates.push(Candidate {
                id: candidate_id(rule, factor, &fingerprint),
                rule: rule.clone(),
                factor: factor.clone(),
                disease: disease.clone(),
                score,
                supporting_patients: supporting.len(),
                evaluations: evaluated,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| a.rule.cmp(&b.rule)).then_with(|| a.factor.cmp(&b.factor))
    });
    Ok(CandidateSet { model_fingerprint: fingerprint, options: options.clone(), candidates })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use kgrefine_core::graph::{Node, ReferenceRange};
    use kgrefine_core::graph::{add_lab_parameter, codes};
    use kgrefine_core::linkpred::logreg::LogisticModel;
    use kgrefine_core::linkpred::{ClassifierKind, Hyperparams, Model};

    /// One disease with a rule over `Alt_increased`; `Alt` is evaluated for
    /// six patients, `Ggt` for three. Two of the Alt patients have the disease.
    fn fixture() -> Graph {
        let mut g = Graph::new();
        g.add_node(Node::new("Hepatitis", NodeKind::Disease).with_label("Hepatitis").with_code(codes::ICD10, "K75.9"))
            .unwrap();
        g.add_node(Node::new("Rule_Hepatitis", NodeKind::LaboratoryRule)).unwrap();
        g.add_edge("Hepatitis", labels::HAS_RULE, "Rule_Hepatitis").unwrap();
        for (name, loinc) in [("Alt", "1742-6"), ("Ggt", "2324-2"), ("Ast", "1920-8")] {
            let range = ReferenceRange::new(name, Some(0.0), Some(50.0), "U/l").unwrap();
            add_lab_parameter(&mut g, name, loinc, &range).unwrap();
        }
        g.add_edge("Rule_Hepatitis", labels::SIGNALS_BY, "Ast_increased").unwrap();
        for i in 0..6 {
            let p = format!("Patient_{i}");
            g.add_node(Node::new(&p, NodeKind::Patient)).unwrap();
            g.add_edge(&p, labels::HAS_FINDING, "Alt_increased").unwrap();
            if i < 3 {
                g.add_edge(&p, labels::HAS_FINDING, "Ggt_decreased").unwrap();
            }
            if i < 2 {
                g.add_edge(&p, labels::HAS_DISEASE, "Hepatitis").unwrap();
            }
        }
        g
    }

    /// `n` hand-made candidates spread over two diseases.
    pub(crate) fn sample_set(n: usize) -> CandidateSet {
        let candidates = (0..n)
            .map(|i| {
                let (rule, factor) = (format!("Rule_{}", i % 2), format!("P{i}_increased"));
                Candidate {
                    id: candidate_id(&rule, &factor, "model"),
                    rule,
                    factor,
                    disease: format!("Disease_{}", i % 2),
                    score: 1.0 - i as f64 / (n as f64 + 1.0),
                    supporting_patients: i,
                    evaluations: 10,
                }
            })
            .collect();
        CandidateSet { model_fingerprint: "model".into(), options: CandidateOptions::default(), candidates }
    }

    /// Logistic model that scores every row at sigmoid(`intercept`).
    pub(crate) fn constant_classifier(input_dim: usize, intercept: f64) -> TrainedClassifier {
        TrainedClassifier {
            kind: ClassifierKind::Logreg,
            params: Hyperparams::Logreg { c: 1.0 },
            input_dim,
            standardizer: None,
            model: Model::Logreg(LogisticModel { weights: vec![0.0; input_dim], intercept, iterations: 0, converged: true }),
            cv: None,
        }
    }

    /// Model with a vector per node and a classifier that accepts every pair.
    fn accept_all(g: &Graph) -> (EmbeddingModel, TrainedClassifier) {
        let tokens: Vec<String> = g.nodes().map(|n| n.id.clone()).collect();
        let input = (0..tokens.len() * 2).map(|i| i as f64 / 10.0).collect();
        let model = EmbeddingModel::from_rows(tokens, 2, input).unwrap();
        (model, constant_classifier(4, 10.0))
    }

    #[test]
    fn evaluation_count_filters_factors() {
        let g = fixture();
        let counts = evaluation_counts(&g);
        assert_eq!(counts["Alt"], 6);
        assert_eq!(counts["Ggt"], 3);
        let (model, clf) = accept_all(&g);
        let set = generate_candidates(&g, &model, &clf, &CandidateOptions::default()).unwrap();
        let factors: BTreeSet<&str> = set.candidates.iter().map(|c| c.factor.as_str()).collect();
        // Ggt has 3 evaluations, Ast none; Ast_increased is already linked
        assert_eq!(factors, BTreeSet::from(["Alt_decreased", "Alt_increased"]));
        let alt = set.candidates.iter().find(|c| c.factor == "Alt_increased").unwrap();
        assert_eq!(alt.supporting_patients, 2);
        assert_eq!(alt.evaluations, 6);
        assert_eq!(alt.disease, "Hepatitis");

        let loose = CandidateOptions { min_evaluations: 3, ..CandidateOptions::default() };
        let set = generate_candidates(&g, &model, &clf, &loose).unwrap();
        assert!(set.candidates.iter().any(|c| c.factor == "Ggt_decreased"));
        assert!(set.candidates.iter().all(|c| c.factor != "Ast_increased"));
    }

    #[test]
    fn disease_filter_and_stable_ids() {
        let g = fixture();
        let (model, clf) = accept_all(&g);
        let only = |name: &str| CandidateOptions {
            diseases: Some(BTreeSet::from([name.to_string()])),
            ..CandidateOptions::default()
        };
        assert!(generate_candidates(&g, &model, &clf, &only("Cirrhosis")).unwrap().candidates.is_empty());
        let a = generate_candidates(&g, &model, &clf, &only("Hepatitis")).unwrap();
        let b = generate_candidates(&g, &model, &clf, &CandidateOptions::default()).unwrap();
        assert_eq!(a.candidates, b.candidates);
        for c in &a.candidates {
            assert_eq!(c.id, candidate_id(&c.rule, &c.factor, &a.model_fingerprint));
        }
        assert!(a.candidates.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn candidate_file_round_trips_and_rejects_duplicates() {
        let g = fixture();
        let (model, clf) = accept_all(&g);
        let set = generate_candidates(&g, &model, &clf, &CandidateOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        set.save(&path).unwrap();
        assert_eq!(CandidateSet::load(&path).unwrap(), set);

        let mut dup = set.clone();
        dup.candidates.push(dup.candidates[0].clone());
        dup.save(&path).unwrap();
        assert!(matches!(CandidateSet::load(&path), Err(ReviewError::InvalidCandidates(_))));
    }
}
