use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinkPredError;
use crate::eval::Confusion;
use crate::rng;

/// Fold id for each sample. Each class is shuffled and dealt round-robin, so
/// class proportions match across folds. Depends only on labels, `k` and
/// `seed`.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, "cv/folds");
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut r);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
}

/// Mean positive-class F1 of every candidate over the folds.
///
/// `fit_predict` trains on the training part and returns predicted labels
/// for the held-out rows. Work runs in parallel; results are in candidate
/// order regardless of scheduling.
pub fn cross_validate<P, F>(
    x: &[Vec<f64>],
    y: &[bool],
    folds: &[usize],
    k: usize,
    candidates: &[P],
    fit_predict: F,
) -> Result<Vec<CvScore>, LinkPredError>
where
    P: Sync,
    F: Fn(&P, &[Vec<f64>], &[bool], &[Vec<f64>]) -> Result<Vec<bool>, LinkPredError> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if folds[i] == f {
                    vx.push(x[i].clone());
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            let pred = fit_predict(&candidates[c], &tx, &ty, &vx)?;
            Ok(Confusion::from_labels(&pred, &vy).f1())
        })
        .collect::<Result<_, LinkPredError>>()?;
    Ok(scores
        .chunks(k)
        .map(|fs| CvScore { mean_f1: fs.iter().sum::<f64>() / k as f64, fold_f1: fs.to_vec() })
        .collect())
}
