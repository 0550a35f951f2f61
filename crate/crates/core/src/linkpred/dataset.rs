use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LinkPredError, PairSample, PairSource, Prediction};
use crate::embedding::EmbeddingModel;

/// Rule vector followed by factor vector.
pub fn featurize(model: &EmbeddingModel, rule: &str, factor: &str) -> Result<Vec<f64>, LinkPredError> {
    let lookup = |t: &str| model.vector(t).map_err(|_| LinkPredError::UnknownToken(t.to_string()));
    let mut out = Vec::with_capacity(2 * model.dim());
    out.extend_from_slice(lookup(rule)?);
    out.extend_from_slice(lookup(factor)?);
    Ok(out)
}

/// Feature rows and labels for a dataset.
pub fn featurize_all(model: &EmbeddingModel, pairs: &[PairSample]) -> Result<(Vec<Vec<f64>>, Vec<bool>), LinkPredError> {
    let rows = pairs.iter().map(|p| featurize(model, &p.rule, &p.factor)).collect::<Result<_, _>>()?;
    Ok((rows, pairs.iter().map(PairSample::is_positive).collect()))
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m).powi(2) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    rule_id: String,
    factor_id: String,
    label: u8,
    source: String,
}

pub fn write_pairs(pairs: &[PairSample], out: impl Write) -> Result<(), LinkPredError> {
    let mut w = csv::Writer::from_writer(out);
    for p in pairs {
        w.serialize(PairRow {
            rule_id: p.rule.clone(),
            factor_id: p.factor.clone(),
            label: p.is_positive() as u8,
            source: p.source.as_str().to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `rule_id,factor_id,label,source`. A missing source column is
/// inferred from the label.
pub fn read_pairs(input: impl Read) -> Result<Vec<PairSample>, LinkPredError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (rule_col, factor_col) = match (col("rule_id"), col("factor_id")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(LinkPredError::Parse { line: 1, message: "missing rule_id or factor_id column".into() }),
    };
    let (label_col, source_col) = (col("label"), col("source"));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let err = |message: String| LinkPredError::Parse { line, message };
        let label = match label_col.map(field) {
            None | Some("") => None,
            Some("1" | "positive" | "true") => Some(true),
            Some("0" | "negative" | "false") => Some(false),
            Some(other) => return Err(err(format!("bad label {other:?}"))),
        };
        let source = match source_col.map(field) {
            None | Some("") => match label {
                Some(false) => PairSource::Random,
                _ => PairSource::ExistingEdge,
            },
            Some(s) => s.parse().map_err(err)?,
        };
        if let Some(l) = label {
            if l != (source == PairSource::ExistingEdge) {
                return Err(err(format!("label {} contradicts source {source}", l as u8)));
            }
        }
        out.push(PairSample::new(field(rule_col), field(factor_col), source));
    }
    Ok(out)
}

pub fn write_predictions(preds: &[Prediction], out: impl Write) -> Result<(), LinkPredError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rule_id", "factor_id", "score", "label"])?;
    for p in preds {
        w.write_record([p.rule.as_str(), p.factor.as_str(), &format!("{:.6}", p.score), if p.label { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EmbeddingModel {
        EmbeddingModel::from_rows(vec!["R".into(), "F".into()], 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn concatenation_order() {
        let m = model();
        assert_eq!(featurize(&m, "R", "F").unwrap(), [1.0, 2.0, 3.0, 4.0]);
        assert_ne!(featurize(&m, "R", "F").unwrap(), featurize(&m, "F", "R").unwrap());
        assert!(matches!(featurize(&m, "R", "X"), Err(LinkPredError::UnknownToken(t)) if t == "X"));
    }

    #[test]
    fn length_is_twice_dim() {
        let tokens: Vec<String> = vec!["a".into(), "b".into()];
        let m = EmbeddingModel::from_rows(tokens, 100, vec![0.5; 200]).unwrap();
        assert_eq!(featurize(&m, "a", "b").unwrap().len(), 200);
    }

    #[test]
    fn pair_file_round_trip() {
        let pairs = vec![
            PairSample::new("R1", "F1", PairSource::ExistingEdge),
            PairSample::new("R1", "F2", PairSource::Opposite),
            PairSample::new("R2", "F3", PairSource::PerRule),
        ];
        let mut buf = Vec::new();
        write_pairs(&pairs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("rule_id,factor_id,label,source\n"));
        assert_eq!(read_pairs(buf.as_slice()).unwrap(), pairs);
    }

    #[test]
    fn contradictory_label_is_rejected() {
        let text = "rule_id,factor_id,label,source\nR,F,0,existing-edge\n";
        assert!(matches!(read_pairs(text.as_bytes()), Err(LinkPredError::Parse { line: 2, .. })));
        let unlabeled = read_pairs("rule_id,factor_id\nR,F\n".as_bytes()).unwrap();
        assert_eq!(unlabeled.len(), 1);
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.apply(&rows[0]), [-1.0, 0.0]);
        assert_eq!(s.apply(&rows[1]), [1.0, 0.0]);
    }
}
