use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate, DataSource, EvalError, GraphVariant, HoldoutSplit, Metrics, RunConfig};
use crate::embedding::{build_vocab, train_skipgram, EmbeddingModel};
use crate::graph::{load_graph, FrozenGraph, Graph};
use crate::ingest::{augment_graph, generate_synthetic_cohort, read_patient_tables, AugmentReport, PatientRecord};
use crate::linkpred::{
    condition_edges, featurize_all, fit, predict, CvSummary, Hyperparams, NegativeStrategy, PairSample, Prediction,
    SamplingUniverse, TrainedClassifier,
};
use crate::rng;
use crate::walks::{extract_corpus, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub base_nodes: usize,
    pub base_edges: usize,
    pub condition_edges: usize,
    pub walk_nodes: usize,
    pub walk_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train_positives: usize,
    pub train_negatives: usize,
    pub test_positives: usize,
    pub test_negatives: usize,
}

/// Everything a run produced, apart from the trained artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub fingerprint: String,
    pub config: RunConfig,
    pub graph: GraphSummary,
    pub augmentation: Option<AugmentReport>,
    pub dataset: DatasetCounts,
    /// Held-out triples found in the walk corpus. Always zero in a finished run.
    pub leakage_hits: usize,
    pub corpus_lines: usize,
    pub corpus_digest: String,
    pub vocabulary: usize,
    pub model_digest: String,
    pub selected: Hyperparams,
    pub cv: Option<CvSummary>,
    pub metrics: Metrics,
    pub predictions: Vec<Prediction>,
    /// Wall-clock seconds per stage. Cached stages report their original cost.
    pub stage_seconds: BTreeMap<String, f64>,
}

impl RunReport {
    /// Report with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> RunReport {
        RunReport { stage_seconds: BTreeMap::new(), ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledPairs {
    pub train: Vec<PairSample>,
    pub test: Vec<PairSample>,
}

impl LabeledPairs {
    fn counts(&self) -> DatasetCounts {
        let count = |v: &[PairSample], pos: bool| v.iter().filter(|p| p.is_positive() == pos).count();
        DatasetCounts {
            train_positives: count(&self.train, true),
            train_negatives: count(&self.train, false),
            test_positives: count(&self.test, true),
            test_negatives: count(&self.test, false),
        }
    }
}

/// Trained artifacts of a run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub walk_graph: FrozenGraph,
    pub corpus: Arc<Corpus>,
    pub model: Arc<EmbeddingModel>,
    pub classifier: TrainedClassifier,
    pub pairs: Arc<LabeledPairs>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub artifacts: RunArtifacts,
}

struct WalkGraph {
    graph: FrozenGraph,
    augmentation: Option<AugmentReport>,
    seconds: f64,
}

struct CachedCorpus {
    corpus: Arc<Corpus>,
    leakage_hits: usize,
    seconds: f64,
}

struct CachedModel {
    model: Arc<EmbeddingModel>,
    seconds: f64,
}

/// Loaded data and holdout split shared by runs that differ only in
/// downstream settings. Corpora, embeddings and labeled pairs are cached.
pub struct Session {
    shared_key: String,
    base: Graph,
    records: Option<Vec<PatientRecord>>,
    split: HoldoutSplit,
    universe: SamplingUniverse,
    base_seconds: BTreeMap<String, f64>,
    walk_graphs: HashMap<GraphVariant, WalkGraph>,
    corpora: HashMap<String, CachedCorpus>,
    models: HashMap<String, CachedModel>,
    pairs: HashMap<NegativeStrategy, (Arc<LabeledPairs>, f64)>,
}

fn load_data(source: &DataSource) -> Result<(Graph, Option<Vec<PatientRecord>>), EvalError> {
    match source {
        DataSource::Synthetic { synth, seed } => {
            let out = generate_synthetic_cohort(synth, *seed)?;
            let records = out.records()?;
            Ok((out.kg, Some(records)))
        }
        DataSource::Files { kg, patients } => {
            let graph = load_graph(kg)?;
            let records = match patients {
                Some(t) => Some(read_patient_tables(&t.patients, &t.diagnoses, &t.labevents)?),
                None => None,
            };
            Ok((graph, records))
        }
    }
}

/// Patient-level nodes may only enter through augmentation.
fn check_privacy(graph: &Graph) -> Result<(), EvalError> {
    match graph.nodes().find(|n| n.kind.is_augmentation_only()) {
        Some(n) => Err(EvalError::PatientDataInBase { node: n.id.clone(), kind: n.kind.to_string() }),
        None => Ok(()),
    }
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

impl Session {
    pub fn open(config: &RunConfig) -> Result<Self, EvalError> {
        config.validate()?;
        let mut base_seconds = BTreeMap::new();
        let t = Instant::now();
        let (base, records) = load_data(&config.data)?;
        check_privacy(&base)?;
        base_seconds.insert("load".to_string(), seconds_since(t));
        let t = Instant::now();
        let split = super::holdout_split(&base, &config.split_spec())?;
        base_seconds.insert("split".to_string(), seconds_since(t));
        Ok(Session {
            shared_key: config.shared_key(),
            universe: SamplingUniverse::from_graph(&base),
            base,
            records,
            split,
            base_seconds,
            walk_graphs: HashMap::new(),
            corpora: HashMap::new(),
            models: HashMap::new(),
            pairs: HashMap::new(),
        })
    }

    pub fn base_graph(&self) -> &Graph {
        &self.base
    }

    pub fn split(&self) -> &HoldoutSplit {
        &self.split
    }

    fn walk_graph(&mut self, variant: GraphVariant) -> Result<&WalkGraph, EvalError> {
        if !self.walk_graphs.contains_key(&variant) {
            let t = Instant::now();
            let train = self.split.train.clone().freeze();
            let entry = match variant {
                GraphVariant::Baseline => WalkGraph { graph: train, augmentation: None, seconds: 0.0 },
                GraphVariant::Augmented => {
                    let records = self.records.as_deref().ok_or_else(|| {
                        EvalError::InvalidConfig("the augmented variant needs patient tables".into())
                    })?;
                    let aug = augment_graph(&train, records);
                    WalkGraph { graph: aug.graph.freeze(), augmentation: Some(aug.report), seconds: seconds_since(t) }
                }
            };
            self.walk_graphs.insert(variant, entry);
        }
        Ok(&self.walk_graphs[&variant])
    }

    fn corpus(&mut self, config: &RunConfig) -> Result<&CachedCorpus, EvalError> {
        let key = serde_json::to_string(&(config.variant, config.walk_config())).expect("serializes");
        if !self.corpora.contains_key(&key) {
            let graph = self.walk_graph(config.variant)?.graph.clone();
            let t = Instant::now();
            let corpus = extract_corpus(&graph, &config.walk_config())?;
            let seconds = seconds_since(t);
            let leakage_hits = corpus.count_triples(&self.split.held_out);
            self.corpora.insert(key.clone(), CachedCorpus { corpus: Arc::new(corpus), leakage_hits, seconds });
        }
        Ok(&self.corpora[&key])
    }

    fn model(&mut self, config: &RunConfig) -> Result<&CachedModel, EvalError> {
        let key = serde_json::to_string(&(config.variant, config.walk_config(), config.dimension, &config.embedding))
            .expect("serializes");
        if !self.models.contains_key(&key) {
            let corpus = self.corpus(config)?.corpus.clone();
            let t = Instant::now();
            let vocab = build_vocab(corpus.lines.iter().map(String::as_str))?;
            let model = train_skipgram(&corpus.lines, &vocab, config.dimension, &config.embedding, config.seed)?;
            self.models.insert(key.clone(), CachedModel { model: Arc::new(model), seconds: seconds_since(t) });
        }
        Ok(&self.models[&key])
    }

    /// Train and test pairs for a negative strategy. Each side gets its own
    /// negatives, drawn from its own positives; no pair lands on both sides
    /// and no known positive is ever labeled negative.
    fn pairs(&mut self, strategy: NegativeStrategy, seed: u64) -> Result<(Arc<LabeledPairs>, f64), EvalError> {
        if let Some((p, s)) = self.pairs.get(&strategy) {
            return Ok((p.clone(), *s));
        }
        let t = Instant::now();
        let mut exclude: HashSet<(String, String)> = self
            .split
            .train_positives
            .iter()
            .chain(&self.split.test_positives)
            .map(PairSample::key)
            .collect();
        let train_neg = strategy.sample(&self.universe, &self.base, &self.split.train_positives, &exclude, seed)?;
        exclude.extend(train_neg.iter().map(PairSample::key));
        let test_seed = rng::mix(seed ^ rng::fnv1a(b"negatives/test"));
        let test_neg = strategy.sample(&self.universe, &self.base, &self.split.test_positives, &exclude, test_seed)?;
        let pairs = Arc::new(LabeledPairs {
            train: self.split.train_positives.iter().cloned().chain(train_neg).collect(),
            test: self.split.test_positives.iter().cloned().chain(test_neg).collect(),
        });
        let seconds = seconds_since(t);
        self.pairs.insert(strategy, (pairs.clone(), seconds));
        Ok((pairs, seconds))
    }

    /// Runs one configuration. Its data, seed and holdout fraction must match
    /// the ones the session was opened with.
    pub fn run(&mut self, config: &RunConfig) -> Result<RunOutcome, EvalError> {
        config.validate()?;
        if config.shared_key() != self.shared_key {
            return Err(EvalError::InvalidConfig("data, seed and holdout fraction must match the session".into()));
        }
        let mut seconds = self.base_seconds.clone();

        let (walk_graph, augmentation, augment_seconds) = {
            let w = self.walk_graph(config.variant)?;
            (w.graph.clone(), w.augmentation.clone(), w.seconds)
        };
        seconds.insert("augment".into(), augment_seconds);

        let (corpus, leakage_hits) = {
            let c = self.corpus(config)?;
            seconds.insert("walks".into(), c.seconds);
            (c.corpus.clone(), c.leakage_hits)
        };
        if leakage_hits > 0 {
            return Err(EvalError::Leakage { hits: leakage_hits });
        }

        let model = {
            let m = self.model(config)?;
            seconds.insert("embedding".into(), m.seconds);
            m.model.clone()
        };

        let (pairs, sampling_seconds) = self.pairs(config.negatives, config.seed)?;
        seconds.insert("sampling".into(), sampling_seconds);

        let t = Instant::now();
        let (x, y) = featurize_all(&model, &pairs.train)?;
        let classifier = fit(&config.classifier_spec(), &x, &y)?;
        seconds.insert("fit".into(), seconds_since(t));

        let t = Instant::now();
        let (test_x, _) = featurize_all(&model, &pairs.test)?;
        let predictions = pairs
            .test
            .iter()
            .zip(&test_x)
            .map(|(p, row)| predict(&classifier, &p.rule, &p.factor, row))
            .collect::<Result<Vec<_>, _>>()?;
        let (test_pos, test_neg): (Vec<PairSample>, Vec<PairSample>) =
            pairs.test.iter().cloned().partition(PairSample::is_positive);
        let metrics = evaluate(&predictions, &test_pos, &test_neg)?;
        seconds.insert("predict".into(), seconds_since(t));

        let report = RunReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            fingerprint: config.fingerprint(),
            config: config.clone(),
            graph: GraphSummary {
                base_nodes: self.base.node_count(),
                base_edges: self.base.edge_count(),
                condition_edges: condition_edges(&self.base).len(),
                walk_nodes: walk_graph.node_count(),
                walk_edges: walk_graph.edge_count(),
            },
            augmentation,
            dataset: pairs.counts(),
            leakage_hits,
            corpus_lines: corpus.len(),
            corpus_digest: corpus.digest(),
            vocabulary: model.len(),
            model_digest: model.digest(),
            selected: classifier.params,
            cv: classifier.cv.clone(),
            metrics,
            predictions,
            stage_seconds: seconds,
        };
        Ok(RunOutcome { report, artifacts: RunArtifacts { walk_graph, corpus, model, classifier, pairs } })
    }
}

/// Opens a session for `config` and runs it.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutcome, EvalError> {
    Session::open(config)?.run(config)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::embedding::TrainHyperparams;
    use crate::graph::{Node, NodeKind};
    use crate::ingest::SynthConfig;
    use crate::linkpred::forest::{ForestParams, MaxFeatures};
    use crate::linkpred::ClassifierKind;

    pub(crate) fn small_config() -> RunConfig {
        RunConfig {
            data: DataSource::Synthetic {
                synth: SynthConfig { diseases: 8, parameters: 20, patients: 80, ..SynthConfig::default() },
                seed: 3,
            },
            walks_per_node: 10,
            dimension: 16,
            embedding: TrainHyperparams { epochs: 2, ..TrainHyperparams::default() },
            classifier: ClassifierKind::RandomForest,
            grid: vec![Hyperparams::RandomForest(ForestParams {
                trees: 20,
                max_features: MaxFeatures::Sqrt,
                ..ForestParams::default()
            })],
            ..RunConfig::default()
        }
    }

    #[test]
    fn end_to_end_is_reproducible() {
        let config = small_config();
        let a = run_pipeline(&config).unwrap().report;
        let b = run_pipeline(&config).unwrap().report;
        assert_eq!(a.without_timings(), b.without_timings());
        assert_eq!(a.leakage_hits, 0);
        assert_eq!(a.fingerprint, config.fingerprint());
        let replayed: RunConfig = serde_json::from_str(&serde_json::to_string(&a.config).unwrap()).unwrap();
        assert_eq!(run_pipeline(&replayed).unwrap().report.without_timings(), a.without_timings());
        assert!(a.augmentation.is_some());
        assert_eq!(a.dataset.test_positives + a.dataset.train_positives, a.graph.condition_edges);
        assert_eq!(a.predictions.len(), a.dataset.test_positives + a.dataset.test_negatives);
    }

    #[test]
    fn train_and_test_pairs_are_disjoint() {
        let config = small_config();
        let mut session = Session::open(&config).unwrap();
        for strategy in [NegativeStrategy::Random, NegativeStrategy::PerRule { k: 3 }, NegativeStrategy::Opposite] {
            let (pairs, _) = session.pairs(strategy, 0).unwrap();
            let train: HashSet<_> = pairs.train.iter().map(PairSample::key).collect();
            assert!(pairs.test.iter().all(|p| !train.contains(&p.key())), "{strategy}");
            let positives: HashSet<_> = condition_edges(session.base_graph()).into_iter().map(|t| (t.src, t.dst)).collect();
            for p in pairs.train.iter().chain(&pairs.test).filter(|p| !p.is_positive()) {
                assert!(!positives.contains(&p.key()));
            }
        }
    }

    #[test]
    fn walks_never_see_held_out_edges() {
        let config = small_config();
        let mut session = Session::open(&config).unwrap();
        for variant in [GraphVariant::Baseline, GraphVariant::Augmented] {
            let c = RunConfig { variant, ..config.clone() };
            assert_eq!(session.corpus(&c).unwrap().leakage_hits, 0);
        }
        let held = session.split().held_out.clone();
        let g = &session.walk_graph(GraphVariant::Augmented).unwrap().graph;
        assert!(held.iter().all(|t| !g.contains_triple(&t.src, &t.label, &t.dst)));
    }

    #[test]
    fn patient_nodes_in_base_are_rejected() {
        let mut g = crate::graph::cholestasis();
        g.add_node(Node::new("Patient_1", NodeKind::Patient)).unwrap();
        assert!(matches!(check_privacy(&g), Err(EvalError::PatientDataInBase { .. })));
    }

    #[test]
    fn session_rejects_foreign_config() {
        let config = small_config();
        let mut session = Session::open(&config).unwrap();
        assert!(session.run(&RunConfig { seed: 99, ..config }).is_err());
    }
}
