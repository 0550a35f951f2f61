//! L2-regularized logistic regression.
//!
//! Minimizes `½‖w‖² + C·Σ log(1 + exp(-yᵢ(w·xᵢ + b)))` with `yᵢ ∈ {-1, +1}`;
//! the intercept is not penalized. Solved with L-BFGS.

use serde::{Deserialize, Serialize};

use super::LinkPredError;
use crate::embedding::sgns::{dot, log_sigmoid, sigmoid};

pub const DEFAULT_MAX_ITER: usize = 1000;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// Objective value at `(weights, intercept)`.
pub fn objective(x: &[Vec<f64>], y: &[bool], c: f64, weights: &[f64], intercept: f64) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &l)| -log_sigmoid(sign(l) * (dot(weights, row) + intercept)))
        .sum();
    0.5 * dot(weights, weights) + c * loss
}

/// Objective and gradient over `theta = [w.., b]`.
fn value_and_gradient(x: &[Vec<f64>], y: &[bool], c: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    let d = theta.len() - 1;
    let (w, b) = (&theta[..d], theta[d]);
    grad[..d].copy_from_slice(w);
    grad[d] = 0.0;
    let mut loss = 0.0;
    for (row, &l) in x.iter().zip(y) {
        let s = sign(l);
        let margin = s * (dot(w, row) + b);
        loss -= log_sigmoid(margin);
        let coef = -c * s * sigmoid(-margin);
        for (g, xi) in grad[..d].iter_mut().zip(row) {
            *g += coef * xi;
        }
        grad[d] += coef;
    }
    0.5 * dot(w, w) + c * loss
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], c: f64, max_iter: usize) -> Result<LogisticModel, LinkPredError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(LinkPredError::InvalidSpec("feature and label counts differ or are empty".into()));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(LinkPredError::InvalidSpec(format!("C must be positive, got {c}")));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(LinkPredError::DegenerateLabels);
    }
    let d = x[0].len();
    let (theta, iterations, converged) = lbfgs(
        |t, g| value_and_gradient(x, y, c, t, g),
        vec![0.0; d + 1],
        max_iter,
        GRADIENT_TOLERANCE,
    );
    Ok(LogisticModel { intercept: theta[d], weights: theta[..d].to_vec(), iterations, converged })
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Limited-memory BFGS with backtracking Armijo line search.
fn lbfgs(
    f: impl Fn(&[f64], &mut [f64]) -> f64,
    mut x: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, usize, bool) {
    const MEMORY: usize = 10;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    for iter in 0..max_iter {
        if norm(&g) < tol {
            return (x, iter, true);
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(yv) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.last() {
            let gamma = dot(s, yv) / dot(yv, yv);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if history.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
        let mut accepted = false;
        while step > 1e-20 {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + step * di;
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new <= fx + 1e-4 * step * slope {
                fx = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            let ok = norm(&g) < tol;
            return (x, iter, ok);
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) && sy > 0.0 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, yv, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
    }
    let ok = norm(&g) < tol;
    (x, max_iter, ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent optimizer: damped Newton with a dense Cholesky solve.
    fn newton(x: &[Vec<f64>], y: &[bool], c: f64) -> Vec<f64> {
        let d = x[0].len() + 1;
        let mut theta = vec![0.0; d];
        for _ in 0..100 {
            let mut grad = vec![0.0; d];
            let mut hess = vec![vec![0.0; d]; d];
            for i in 0..d - 1 {
                grad[i] = theta[i];
                hess[i][i] = 1.0;
            }
            for (row, &l) in x.iter().zip(y) {
                let aug: Vec<f64> = row.iter().copied().chain([1.0]).collect();
                let z: f64 = aug.iter().zip(&theta).map(|(a, t)| a * t).sum();
                let p = 1.0 / (1.0 + (-z).exp());
                let t = if l { 1.0 } else { 0.0 };
                for a in 0..d {
                    grad[a] += c * (p - t) * aug[a];
                    for b in 0..d {
                        hess[a][b] += c * p * (1.0 - p) * aug[a] * aug[b];
                    }
                }
            }
            // Cholesky
            let mut lmat = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|k| lmat[i][k] * lmat[j][k]).sum();
                    if i == j {
                        lmat[i][j] = (hess[i][i] - s).sqrt();
                    } else {
                        lmat[i][j] = (hess[i][j] - s) / lmat[j][j];
                    }
                }
            }
            let mut z = vec![0.0; d];
            for i in 0..d {
                let s: f64 = (0..i).map(|k| lmat[i][k] * z[k]).sum();
                z[i] = (grad[i] - s) / lmat[i][i];
            }
            let mut step = vec![0.0; d];
            for i in (0..d).rev() {
                let s: f64 = (i + 1..d).map(|k| lmat[k][i] * step[k]).sum();
                step[i] = (z[i] - s) / lmat[i][i];
            }
            for (t, s) in theta.iter_mut().zip(&step) {
                *t -= s;
            }
            if step.iter().map(|s| s * s).sum::<f64>().sqrt() < 1e-13 {
                break;
            }
        }
        theta
    }

    fn fixture(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut r = crate::rng::indexed(seed, 0);
        let truth: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let y = x.iter().map(|row| dot(&truth, row) + 0.3 + r.gen_range(-0.8..0.8) > 0.0).collect();
        (x, y)
    }

    #[test]
    fn matches_newton_oracle() {
        let (x, y) = fixture(50, 4, 3);
        for c in [0.1, 1.0, 10.0] {
            let m = fit_logistic(&x, &y, c, DEFAULT_MAX_ITER).unwrap();
            assert!(m.converged);
            let oracle = newton(&x, &y, c);
            for (a, b) in m.weights.iter().chain([&m.intercept]).zip(&oracle) {
                assert!((a - b).abs() <= 1e-3, "C={c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn separable_line() {
        let x = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let y = vec![false, false, true, true];
        let m = fit_logistic(&x, &y, 1.0, DEFAULT_MAX_ITER).unwrap();
        for (row, &l) in x.iter().zip(&y) {
            assert_eq!(m.probability(row) >= 0.5, l);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(fit_logistic(&x, &[true, true], 1.0, 10), Err(LinkPredError::DegenerateLabels)));
    }

    #[test]
    fn final_loss_not_above_zero_weights() {
        for seed in 0..5 {
            let (x, y) = fixture(40, 6, seed);
            let m = fit_logistic(&x, &y, 1.0, DEFAULT_MAX_ITER).unwrap();
            let at_zero = objective(&x, &y, 1.0, &[0.0; 6], 0.0);
            assert!(objective(&x, &y, 1.0, &m.weights, m.intercept) <= at_zero);
        }
    }
}
