use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, stratified_folds};
use super::forest::{fit_forest, Forest, ForestParams, MaxFeatures};
use super::logreg::{fit_logistic, LogisticModel, DEFAULT_MAX_ITER};
use super::svm::{fit_svm, Kernel, SvmModel, DEFAULT_TOLERANCE};
use super::{LinkPredError, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Logreg,
    Svm,
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Logreg, ClassifierKind::Svm, ClassifierKind::RandomForest];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::Svm => "svm",
            ClassifierKind::RandomForest => "random-forest",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" | "lr" => Ok(ClassifierKind::Logreg),
            "svm" => Ok(ClassifierKind::Svm),
            "random-forest" | "rf" | "forest" => Ok(ClassifierKind::RandomForest),
            other => Err(format!("unknown classifier {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Hyperparams {
    Logreg {
        c: f64,
    },
    Svm {
        kernel: SvmKernel,
        c: f64,
        /// RBF width; `None` means `1 / feature_length`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    RandomForest(ForestParams),
}

impl Hyperparams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::Logreg { .. } => ClassifierKind::Logreg,
            Hyperparams::Svm { .. } => ClassifierKind::Svm,
            Hyperparams::RandomForest(_) => ClassifierKind::RandomForest,
        }
    }
}

pub type Grid = Vec<Hyperparams>;

/// The default search space of each classifier.
pub fn default_grid(kind: ClassifierKind) -> Grid {
    match kind {
        ClassifierKind::Logreg => [0.01, 0.1, 1.0, 10.0].into_iter().map(|c| Hyperparams::Logreg { c }).collect(),
        ClassifierKind::Svm => [SvmKernel::Linear, SvmKernel::Rbf]
            .into_iter()
            .flat_map(|kernel| [0.1, 1.0, 10.0].into_iter().map(move |c| Hyperparams::Svm { kernel, c, gamma: None }))
            .collect(),
        ClassifierKind::RandomForest => {
            let mut grid = Vec::new();
            for trees in [100, 300] {
                for max_depth in [None, Some(10)] {
                    for max_features in [MaxFeatures::Sqrt, MaxFeatures::All] {
                        for min_samples_split in [2, 5] {
                            for min_samples_leaf in [1, 2] {
                                for bootstrap in [true, false] {
                                    grid.push(Hyperparams::RandomForest(ForestParams {
                                        trees,
                                        max_depth,
                                        max_features,
                                        min_samples_split,
                                        min_samples_leaf,
                                        bootstrap,
                                    }));
                                }
                            }
                        }
                    }
                }
            }
            grid
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Search space; empty selects the default grid of `kind`.
    pub grid: Grid,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec { kind: ClassifierKind::RandomForest, grid: Vec::new(), folds: 10, seed: 0, standardize: false }
    }
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec { kind, seed, ..Default::default() }
    }

    pub fn effective_grid(&self) -> Grid {
        if self.grid.is_empty() {
            default_grid(self.kind)
        } else {
            self.grid.clone()
        }
    }

    pub fn validate(&self) -> Result<(), LinkPredError> {
        if self.folds < 2 {
            return Err(LinkPredError::InvalidSpec("folds must be at least 2".into()));
        }
        if let Some(h) = self.grid.iter().find(|h| h.kind() != self.kind) {
            return Err(LinkPredError::InvalidSpec(format!("grid entry {h:?} does not match kind {}", self.kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    Logreg(LogisticModel),
    Svm(SvmModel),
    RandomForest(Forest),
}

impl Model {
    pub fn score(&self, row: &[f64]) -> f64 {
        let s = match self {
            Model::Logreg(m) => m.probability(row),
            Model::Svm(m) => m.probability(row),
            Model::RandomForest(f) => f.score(row),
        };
        s.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    pub candidates: Vec<(Hyperparams, f64)>,
    pub best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub params: Hyperparams,
    pub input_dim: usize,
    pub standardizer: Option<Standardizer>,
    pub model: Model,
    pub cv: Option<CvSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub rule: String,
    pub factor: String,
    pub score: f64,
    /// `score >= 0.5`.
    pub label: bool,
}

impl TrainedClassifier {
    pub fn score(&self, row: &[f64]) -> Result<f64, LinkPredError> {
        if row.len() != self.input_dim {
            return Err(LinkPredError::DimensionMismatch { expected: self.input_dim, got: row.len() });
        }
        Ok(match &self.standardizer {
            Some(s) => self.model.score(&s.apply(row)),
            None => self.model.score(row),
        })
    }
}

pub fn predict(
    clf: &TrainedClassifier,
    rule: &str,
    factor: &str,
    row: &[f64],
) -> Result<Prediction, LinkPredError> {
    let score = clf.score(row)?;
    Ok(Prediction { rule: rule.to_string(), factor: factor.to_string(), score, label: score >= 0.5 })
}

fn fit_one(params: &Hyperparams, x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<Model, LinkPredError> {
    Ok(match *params {
        Hyperparams::Logreg { c } => Model::Logreg(fit_logistic(x, y, c, DEFAULT_MAX_ITER)?),
        Hyperparams::Svm { kernel, c, gamma } => {
            let kernel = match kernel {
                SvmKernel::Linear => Kernel::Linear,
                SvmKernel::Rbf => Kernel::Rbf { gamma: gamma.unwrap_or(1.0 / x[0].len().max(1) as f64) },
            };
            Model::Svm(fit_svm(x, y, kernel, c, DEFAULT_TOLERANCE)?)
        }
        Hyperparams::RandomForest(p) => Model::RandomForest(fit_forest(x, y, &p, seed)?),
    })
}

/// Grid search by stratified cross-validation on mean positive-class F1,
/// then a refit of the best point on all rows. Ties keep the earlier grid
/// point; a single-point grid skips the search.
pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[bool]) -> Result<TrainedClassifier, LinkPredError> {
    spec.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(LinkPredError::InvalidSpec("feature and label counts differ or are empty".into()));
    }
    let input_dim = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != input_dim) {
        return Err(LinkPredError::DimensionMismatch { expected: input_dim, got: r.len() });
    }
    let positives = y.iter().filter(|&&l| l).count();
    let minority = positives.min(y.len() - positives);
    if minority == 0 {
        return Err(LinkPredError::DegenerateLabels);
    }
    let standardizer = spec.standardize.then(|| Standardizer::fit(x));
    let scaled: Vec<Vec<f64>>;
    let x = match &standardizer {
        Some(s) => {
            scaled = x.iter().map(|r| s.apply(r)).collect();
            &scaled
        }
        None => x,
    };

    let grid = spec.effective_grid();
    let folds = spec.folds.min(minority);
    let (best, cv) = if grid.len() > 1 && folds >= 2 {
        let assignment = stratified_folds(y, folds, spec.seed);
        let scores = cross_validate(x, y, &assignment, folds, &grid, |p, tx, ty, vx| {
            let m = fit_one(p, tx, ty, spec.seed)?;
            Ok(vx.iter().map(|r| m.score(r) >= 0.5).collect())
        })?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.mean_f1 > scores[best].mean_f1 {
                best = i;
            }
        }
        let candidates = grid.iter().copied().zip(scores.iter().map(|s| s.mean_f1)).collect();
        (best, Some(CvSummary { folds, candidates, best }))
    } else {
        (0, None)
    };
    let params = *grid.get(best).ok_or_else(|| LinkPredError::InvalidSpec("empty grid".into()))?;
    let model = fit_one(&params, x, y, spec.seed)?;
    Ok(TrainedClassifier { kind: spec.kind, params, input_dim, standardizer, model, cv })
}

const FORMAT_TAG: &str = "kgrefine-classifier";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    classifier: T,
}

/// CBOR encoding with a format tag and version.
pub fn write_classifier(clf: &TrainedClassifier, out: impl Write) -> Result<(), LinkPredError> {
    let env = Envelope { format: FORMAT_TAG.to_string(), version: FORMAT_VERSION, classifier: clf };
    ciborium::into_writer(&env, BufWriter::new(out)).map_err(|e| LinkPredError::Format(e.to_string()))
}

pub fn read_classifier(input: impl Read) -> Result<TrainedClassifier, LinkPredError> {
    let env: Envelope<TrainedClassifier> =
        ciborium::from_reader(BufReader::new(input)).map_err(|e| LinkPredError::Format(e.to_string()))?;
    if env.format != FORMAT_TAG || env.version != FORMAT_VERSION {
        return Err(LinkPredError::Format(format!("unsupported format {} v{}", env.format, env.version)));
    }
    Ok(env.classifier)
}

pub fn save_classifier(clf: &TrainedClassifier, path: impl AsRef<Path>) -> Result<(), LinkPredError> {
    write_classifier(clf, File::create(path)?)
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<TrainedClassifier, LinkPredError> {
    read_classifier(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut r = crate::rng::indexed(seed, 5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let l = i % 2 == 0;
            let c = if l { 1.0 } else { -1.0 };
            x.push(vec![c + r.gen_range(-0.8..0.8), c + r.gen_range(-0.8..0.8), r.gen_range(-1.0..1.0)]);
            y.push(l);
        }
        (x, y)
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_grid(ClassifierKind::Logreg).len(), 4);
        assert_eq!(default_grid(ClassifierKind::Svm).len(), 6);
        assert_eq!(default_grid(ClassifierKind::RandomForest).len(), 64);
    }

    #[test]
    fn every_kind_learns_blobs() {
        let (x, y) = blobs(1, 60);
        for kind in ClassifierKind::ALL {
            let mut spec = ClassifierSpec { folds: 3, ..ClassifierSpec::new(kind, 2) };
            if kind == ClassifierKind::RandomForest {
                spec.grid = vec![Hyperparams::RandomForest(ForestParams { trees: 15, ..Default::default() })];
            }
            let clf = fit(&spec, &x, &y).unwrap();
            let correct = x.iter().zip(&y).filter(|(r, &l)| (clf.score(r).unwrap() >= 0.5) == l).count();
            assert!(correct >= 55, "{kind}: {correct}");
            if kind != ClassifierKind::RandomForest {
                assert_eq!(clf.cv.as_ref().unwrap().candidates.len(), default_grid(kind).len());
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (x, y) = blobs(2, 20);
        let spec = ClassifierSpec { grid: vec![Hyperparams::Logreg { c: 1.0 }], ..ClassifierSpec::new(ClassifierKind::Logreg, 0) };
        let clf = fit(&spec, &x, &y).unwrap();
        assert!(matches!(predict(&clf, "r", "f", &[0.0; 2]), Err(LinkPredError::DimensionMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn boundary_score_is_positive() {
        let clf = TrainedClassifier {
            kind: ClassifierKind::Logreg,
            params: Hyperparams::Logreg { c: 1.0 },
            input_dim: 1,
            standardizer: None,
            model: Model::Logreg(LogisticModel { weights: vec![0.0], intercept: 0.0, iterations: 0, converged: true }),
            cv: None,
        };
        let p = predict(&clf, "r", "f", &[3.0]).unwrap();
        assert_eq!(p.score, 0.5);
        assert!(p.label);
    }

    #[test]
    fn memorizing_forest_returns_training_labels() {
        let (x, y) = blobs(3, 40);
        let params = ForestParams { trees: 5, bootstrap: false, max_features: MaxFeatures::All, ..Default::default() };
        let spec = ClassifierSpec { grid: vec![Hyperparams::RandomForest(params)], ..ClassifierSpec::new(ClassifierKind::RandomForest, 1) };
        let clf = fit(&spec, &x, &y).unwrap();
        for (r, &l) in x.iter().zip(&y) {
            assert_eq!(predict(&clf, "r", "f", r).unwrap().label, l);
        }
    }

    #[test]
    fn file_round_trip_and_standardization() {
        let (x, y) = blobs(4, 30);
        for kind in ClassifierKind::ALL {
            let grid = match kind {
                ClassifierKind::Logreg => vec![Hyperparams::Logreg { c: 1.0 }],
                ClassifierKind::Svm => vec![Hyperparams::Svm { kernel: SvmKernel::Rbf, c: 1.0, gamma: None }],
                ClassifierKind::RandomForest => vec![Hyperparams::RandomForest(ForestParams { trees: 4, ..Default::default() })],
            };
            let spec = ClassifierSpec { grid, standardize: true, ..ClassifierSpec::new(kind, 9) };
            let clf = fit(&spec, &x, &y).unwrap();
            let mut buf = Vec::new();
            write_classifier(&clf, &mut buf).unwrap();
            let back = read_classifier(buf.as_slice()).unwrap();
            assert_eq!(back, clf);
            for r in &x {
                assert_eq!(back.score(r).unwrap(), clf.score(r).unwrap());
            }
        }
    }

    #[test]
    fn grid_kind_must_match() {
        let (x, y) = blobs(5, 20);
        let spec = ClassifierSpec { grid: vec![Hyperparams::Logreg { c: 1.0 }], ..ClassifierSpec::new(ClassifierKind::Svm, 0) };
        assert!(matches!(fit(&spec, &x, &y), Err(LinkPredError::InvalidSpec(_))));
    }
}
