use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::linkpred::{PairSample, Prediction};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl Confusion {
    pub fn from_labels(predicted: &[bool], truth: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            c.add(p, t);
        }
        c
    }

    pub fn add(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    /// Same counts with the roles of the classes swapped.
    pub fn flipped(&self) -> Self {
        Confusion { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

/// Positive-class and macro-averaged scores with their confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl From<Confusion> for Metrics {
    fn from(c: Confusion) -> Self {
        let neg = c.flipped();
        Metrics {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            macro_precision: (c.precision() + neg.precision()) / 2.0,
            macro_recall: (c.recall() + neg.recall()) / 2.0,
            macro_f1: (c.f1() + neg.f1()) / 2.0,
            accuracy: ratio(c.tp + c.tn, c.total()),
            confusion: c,
        }
    }
}

/// Scores predictions against labeled test pairs. Every test pair needs a
/// prediction; extra predictions are ignored.
pub fn evaluate(predictions: &[Prediction], positives: &[PairSample], negatives: &[PairSample]) -> Result<Metrics, EvalError> {
    let by_pair: HashMap<(&str, &str), bool> =
        predictions.iter().map(|p| ((p.rule.as_str(), p.factor.as_str()), p.label)).collect();
    let mut c = Confusion::default();
    for (pairs, truth) in [(positives, true), (negatives, false)] {
        for s in pairs {
            let predicted = *by_pair
                .get(&(s.rule.as_str(), s.factor.as_str()))
                .ok_or_else(|| EvalError::MissingPrediction { rule: s.rule.clone(), factor: s.factor.clone() })?;
            c.add(predicted, truth);
        }
    }
    Ok(c.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkpred::PairSource;
    use proptest::prelude::*;

    fn pairs(n: usize, source: PairSource, tag: &str) -> Vec<PairSample> {
        (0..n).map(|i| PairSample::new(format!("R{i}"), format!("{tag}{i}"), source)).collect()
    }

    fn predict_all(pairs: &[&[PairSample]], label: impl Fn(&PairSample) -> bool) -> Vec<Prediction> {
        pairs
            .iter()
            .flat_map(|ps| ps.iter())
            .map(|p| {
                let l = label(p);
                Prediction { rule: p.rule.clone(), factor: p.factor.clone(), score: if l { 1.0 } else { 0.0 }, label: l }
            })
            .collect()
    }

    #[test]
    fn all_correct() {
        let (pos, neg) = (pairs(5, PairSource::ExistingEdge, "P"), pairs(5, PairSource::Random, "N"));
        let preds = predict_all(&[&pos, &neg], PairSample::is_positive);
        let m = evaluate(&preds, &pos, &neg).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn all_positive_on_balanced_set() {
        let (pos, neg) = (pairs(10, PairSource::ExistingEdge, "P"), pairs(10, PairSource::Random, "N"));
        let preds = predict_all(&[&pos, &neg], |_| true);
        let m = evaluate(&preds, &pos, &neg).unwrap();
        assert!((m.recall - 1.0).abs() < 1e-9);
        assert!((m.precision - 0.5).abs() < 1e-9);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn missing_prediction() {
        let pos = pairs(2, PairSource::ExistingEdge, "P");
        let preds = predict_all(&[&pos[..1]], |_| true);
        assert!(matches!(evaluate(&preds, &pos, &[]), Err(EvalError::MissingPrediction { .. })));
    }

    proptest! {
        #[test]
        fn counts_and_f1_identity(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 0..60)) {
            let (pred, truth): (Vec<bool>, Vec<bool>) = labels.iter().copied().unzip();
            let m = Metrics::from(Confusion::from_labels(&pred, &truth));
            prop_assert_eq!(m.confusion.total(), labels.len());
            let (p, r) = (m.precision, m.recall);
            let expected = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            prop_assert!((m.f1 - expected).abs() < 1e-12);
        }
    }
}
