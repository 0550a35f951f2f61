//! Skip-gram negative-sampling objective for one (target, context) pair.
//!
//! With `v` the input vector of the target, `u_c` the output vector of the
//! true context and `u_n` the output vectors of sampled noise tokens, the
//! minimized loss is
//!
//! ```text
//! L = -log σ(u_c·v) - Σ_n log σ(-u_n·v)
//! ```
//!
//! and `∂L/∂(u·v) = σ(u·v) - y` with `y = 1` for the context and `0` for noise.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Derivative of the pair loss with respect to one output's score.
#[inline]
pub fn score_gradient(score: f64, is_context: bool) -> f64 {
    sigmoid(score) - if is_context { 1.0 } else { 0.0 }
}

/// Loss contributed by one output's score.
#[inline]
pub fn score_loss(score: f64, is_context: bool) -> f64 {
    if is_context {
        -log_sigmoid(score)
    } else {
        -log_sigmoid(-score)
    }
}

pub fn pair_loss(input: &[f64], context: &[f64], noise: &[&[f64]]) -> f64 {
    score_loss(dot(input, context), true) + noise.iter().map(|u| score_loss(dot(input, u), false)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub input: Vec<f64>,
    pub context: Vec<f64>,
    pub noise: Vec<Vec<f64>>,
}

pub fn pair_gradient(input: &[f64], context: &[f64], noise: &[&[f64]]) -> PairGradient {
    let mut g_input = vec![0.0; input.len()];
    let mut output_grad = |u: &[f64], is_context: bool| -> Vec<f64> {
        let g = score_gradient(dot(input, u), is_context);
        for (acc, x) in g_input.iter_mut().zip(u) {
            *acc += g * x;
        }
        input.iter().map(|v| g * v).collect()
    };
    let g_context = output_grad(context, true);
    let g_noise = noise.iter().map(|u| output_grad(u, false)).collect();
    PairGradient {
        loss: pair_loss(input, context, noise),
        input: g_input,
        context: g_context,
        noise: g_noise,
    }
}
