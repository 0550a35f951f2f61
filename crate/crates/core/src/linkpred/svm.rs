//! Soft-margin SVM solved by sequential minimal optimization.
//!
//! Working pairs are chosen by maximal violation for the first index and
//! second-order gain for the second. Decision values are mapped to
//! probabilities by a fitted sigmoid.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::LinkPredError;
use crate::embedding::sgns::dot;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;
/// Kernel matrices up to this many rows are precomputed.
const FULL_MATRIX_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Maximal KKT violation `max_up(-yG) - min_low(-yG)` at exit.
    pub violation: f64,
}

enum KernelRows<'a> {
    Full { n: usize, values: Vec<f64> },
    Lazy { x: &'a [Vec<f64>], kernel: Kernel },
}

impl KernelRows<'_> {
    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            KernelRows::Full { n, values } => Cow::Borrowed(&values[i * n..(i + 1) * n]),
            KernelRows::Lazy { x, kernel } => Cow::Owned(x.iter().map(|r| kernel.eval(&x[i], r)).collect()),
        }
    }
}

fn sign(l: bool) -> f64 {
    if l {
        1.0
    } else {
        -1.0
    }
}

/// Solves `min ½αᵀQα - Σα` s.t. `0 ≤ α ≤ C`, `Σ yᵢαᵢ = 0`, `Qᵢⱼ = yᵢyⱼK(xᵢ, xⱼ)`.
pub fn solve_smo(x: &[Vec<f64>], labels: &[bool], kernel: Kernel, c: f64, tol: f64) -> Result<SmoSolution, LinkPredError> {
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| sign(l)).collect();
    let rows = if n <= FULL_MATRIX_LIMIT {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = kernel.eval(&x[i], &x[j]);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        KernelRows::Full { n, values }
    } else {
        KernelRows::Lazy { x, kernel }
    };
    let diag: Vec<f64> = (0..n).map(|i| kernel.eval(&x[i], &x[i])).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let violation = loop {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_gain = f64::INFINITY;
        let k_i = if i_sel == usize::MAX { None } else { Some(rows.row(i_sel)) };
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if let Some(k_i) = &k_i {
                let b = gmax - v;
                if b > 0.0 {
                    let a = diag[i_sel] + diag[t] - 2.0 * k_i[t];
                    let gain = -(b * b) / if a > 0.0 { a } else { TAU };
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = t;
                    }
                }
            }
        }
        let gap = gmax - gmin;
        if i_sel == usize::MAX || j_sel == usize::MAX || gap < tol {
            break if gap.is_finite() { gap.max(0.0) } else { 0.0 };
        }
        if iterations >= max_iter {
            return Err(LinkPredError::NonConvergence(max_iter));
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let k_i = k_i.expect("first index selected");
        let k_j = rows.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] - 2.0 * k_i[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * k_i[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * di + y[j] * k_j[t] * dj);
        }
    };

    // offset from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    Ok(SmoSolution { alpha, rho, iterations, violation })
}

/// Sigmoid `P(positive | f) = 1 / (1 + exp(A·f + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, decision: f64) -> f64 {
        let z = self.a * decision + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Newton fit with smoothed targets and backtracking.
    pub fn fit(decisions: &[f64], labels: &[bool]) -> Platt {
        let prior1 = labels.iter().filter(|&&l| l).count() as f64;
        let prior0 = labels.len() as f64 - prior1;
        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
        let objective = |a: f64, b: f64| -> f64 {
            decisions
                .iter()
                .zip(&targets)
                .map(|(f, t)| {
                    let z = f * a + b;
                    if z >= 0.0 {
                        t * z + (-z).exp().ln_1p()
                    } else {
                        (t - 1.0) * z + z.exp().ln_1p()
                    }
                })
                .sum()
        };
        let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
        let mut fval = objective(a, b);
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
            for (f, t) in decisions.iter().zip(&targets) {
                let z = f * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = t - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < 1e-10 {
                break;
            }
        }
        Platt { a, b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢyᵢ` for each support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub platt: Platt,
}

impl SvmModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, a)| a * self.kernel.eval(sv, row))
            .sum::<f64>()
            - self.rho
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.platt.probability(self.decision(row))
    }

    /// Primal weights of a linear-kernel model.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let d = self.support_vectors.first().map_or(0, Vec::len);
        let mut w = vec![0.0; d];
        for (sv, a) in self.support_vectors.iter().zip(&self.coefficients) {
            for (wi, x) in w.iter_mut().zip(sv) {
                *wi += a * x;
            }
        }
        Some(w)
    }
}

pub fn fit_svm(x: &[Vec<f64>], y: &[bool], kernel: Kernel, c: f64, tol: f64) -> Result<SvmModel, LinkPredError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(LinkPredError::InvalidSpec("feature and label counts differ or are empty".into()));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(LinkPredError::InvalidSpec(format!("C must be positive, got {c}")));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(LinkPredError::DegenerateLabels);
    }
    let sol = solve_smo(x, y, kernel, c, tol)?;
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            coefficients.push(a * sign(y[i]));
        }
    }
    let mut model = SvmModel { kernel, support_vectors, coefficients, rho: sol.rho, platt: Platt { a: -1.0, b: 0.0 } };
    let decisions: Vec<f64> = x.iter().map(|r| model.decision(r)).collect();
    model.platt = Platt::fit(&decisions, y);
    Ok(model)
}
