use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, GraphVariant, Metrics, RunConfig, RunReport, Session};
use crate::linkpred::{ClassifierKind, Hyperparams, NegativeStrategy};
use crate::walks::WalkStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationAxis {
    WalkStrategy,
    NegativeStrategy,
    Dimension,
    GraphVariant,
}

pub const DIMENSIONS: [usize; 6] = [50, 100, 200, 500, 1000, 2000];
pub const PER_RULE_K: [usize; 3] = [1, 3, 5];

impl AblationAxis {
    pub const ALL: [AblationAxis; 4] =
        [AblationAxis::WalkStrategy, AblationAxis::NegativeStrategy, AblationAxis::Dimension, AblationAxis::GraphVariant];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationAxis::WalkStrategy => "walk-strategy",
            AblationAxis::NegativeStrategy => "negative-strategy",
            AblationAxis::Dimension => "dimension",
            AblationAxis::GraphVariant => "graph-variant",
        }
    }

    /// Named configurations along this axis, derived from `base`.
    pub fn cells(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        match self {
            AblationAxis::WalkStrategy => [WalkStrategy::Classic, WalkStrategy::Mid]
                .into_iter()
                .flat_map(|w| {
                    ClassifierKind::ALL.into_iter().map(move |k| {
                        let mut c = RunConfig { walk_strategy: w, classifier: k, ..base.clone() };
                        if k != base.classifier {
                            c.grid = Vec::new();
                        }
                        (format!("{}/{}", w.as_str(), k), c)
                    })
                })
                .collect(),
            AblationAxis::NegativeStrategy => std::iter::once(NegativeStrategy::Random)
                .chain(PER_RULE_K.map(|k| NegativeStrategy::PerRule { k }))
                .chain(std::iter::once(NegativeStrategy::Opposite))
                .map(|n| (n.to_string(), RunConfig { negatives: n, ..base.clone() }))
                .collect(),
            AblationAxis::Dimension => DIMENSIONS
                .into_iter()
                .map(|d| (format!("d{d}"), RunConfig { dimension: d, ..base.clone() }))
                .collect(),
            AblationAxis::GraphVariant => [GraphVariant::Baseline, GraphVariant::Augmented]
                .into_iter()
                .map(|v| (v.to_string(), RunConfig { variant: v, ..base.clone() }))
                .collect(),
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationAxis {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| EvalError::InvalidAxis(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: String,
    pub fingerprint: String,
    pub selected: Hyperparams,
    pub metrics: Metrics,
    pub test_pairs: usize,
}

impl AblationRow {
    pub fn from_report(cell: impl Into<String>, report: &RunReport) -> Self {
        AblationRow {
            cell: cell.into(),
            fingerprint: report.fingerprint.clone(),
            selected: report.selected,
            metrics: report.metrics,
            test_pairs: report.predictions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub axis: AblationAxis,
    pub base_fingerprint: String,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, cell: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.cell == cell)
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "axis", "cell", "precision", "recall", "f1", "macro_f1", "accuracy", "test_pairs", "fingerprint",
        ])?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                self.axis.as_str().to_string(),
                r.cell.clone(),
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                format!("{:.6}", m.f1),
                format!("{:.6}", m.macro_f1),
                format!("{:.6}", m.accuracy),
                r.test_pairs.to_string(),
                r.fingerprint.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.cell.len()).max().unwrap_or(4).max(4);
        let mut out = format!(
            "axis: {}\n{:width$}  {:>9}  {:>6}  {:>6}  {:>8}  {:>8}\n",
            self.axis, "cell", "precision", "recall", "f1", "macro_f1", "accuracy"
        );
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:width$}  {:>9.3}  {:>6.3}  {:>6.3}  {:>8.3}  {:>8.3}",
                r.cell, m.precision, m.recall, m.f1, m.macro_f1, m.accuracy
            );
        }
        out
    }
}

/// Runs every cell of `axis` on one shared split.
pub fn run_ablation(axis: AblationAxis, base: &RunConfig) -> Result<AblationReport, EvalError> {
    let mut session = Session::open(base)?;
    let rows = axis
        .cells(base)
        .into_iter()
        .map(|(cell, config)| Ok(AblationRow::from_report(cell, &session.run(&config)?.report)))
        .collect::<Result<_, EvalError>>()?;
    Ok(AblationReport { axis, base_fingerprint: base.fingerprint(), rows })
}
