//! Random forest of CART trees with Gini splits.
//!
//! Split quality is compared in exact integer arithmetic so that ties are
//! broken deterministically: lowest feature index first, then lowest
//! threshold. A sample goes left when its value is `<=` the threshold.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinkPredError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => dim,
            MaxFeatures::Count(k) => k.clamp(1, dim.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), LinkPredError> {
        if self.trees == 0 || self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return Err(LinkPredError::InvalidSpec(
                "forest needs trees >= 1, min_samples_split >= 2, min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { positive: bool },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> bool {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { positive } => return positive,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting positive.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.votes(row) as f64 / self.trees.len() as f64
    }

    pub fn votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict(row)).count()
    }
}

/// Split quality `(l0²+l1²)/nL + (r0²+r1²)/nR` as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct Quality {
    num: u128,
    den: u128,
}

impl Quality {
    fn new(l: [u64; 2], r: [u64; 2]) -> Self {
        let (nl, nr) = ((l[0] + l[1]) as u128, (r[0] + r[1]) as u128);
        let a = (l[0] as u128).pow(2) + (l[1] as u128).pow(2);
        let b = (r[0] as u128).pow(2) + (r[1] as u128).pow(2);
        Quality { num: a * nr + b * nl, den: nl * nr }
    }

    fn better_than(&self, other: &Quality) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    weight: Vec<u64>,
    params: &'a ForestParams,
    features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in idx {
            c[self.y[i] as usize] += self.weight[i];
        }
        c
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let dim = self.x[0].len();
        let mut candidates: Vec<usize> = if self.features >= dim {
            (0..dim).collect()
        } else {
            sample(&mut self.rng, dim, self.features).into_vec()
        };
        candidates.sort_unstable();
        let total = self.counts(idx);
        let min_leaf = self.params.min_samples_leaf as u64;
        let mut best: Option<(Quality, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in candidates {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = [0u64; 2];
            for k in 0..order.len() - 1 {
                let i = order[k];
                left[self.y[i] as usize] += self.weight[i];
                let (v, next) = (self.x[i][f], self.x[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
                    continue;
                }
                let q = Quality::new(left, right);
                if best.as_ref().is_none_or(|(b, _, _)| q.better_than(b)) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next || threshold < v {
                        threshold = v;
                    }
                    best = Some((q, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> u32 {
        let at = self.nodes.len() as u32;
        let c = self.counts(&idx);
        let leaf = TreeNode::Leaf { positive: c[1] >= c[0] };
        self.nodes.push(leaf.clone());
        let n = c[0] + c[1];
        let stop = c[0] == 0
            || c[1] == 0
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || n < self.params.min_samples_split as u64;
        if stop {
            return at;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else { return at };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at as usize] = TreeNode::Split { feature: feature as u32, threshold, left, right };
        at
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64, index: u64) -> Tree {
    let n = x.len();
    let mut r = rng::indexed(seed, index);
    let mut weight = vec![0u64; n];
    if params.bootstrap {
        for _ in 0..n {
            weight[r.gen_range(0..n)] += 1;
        }
    } else {
        weight.iter_mut().for_each(|w| *w = 1);
    }
    let idx: Vec<usize> = (0..n).filter(|&i| weight[i] > 0).collect();
    let mut b = Builder {
        x,
        y,
        weight,
        params,
        features: params.max_features.resolve(x[0].len()),
        rng: r,
        nodes: Vec::new(),
    };
    b.grow(idx, 0);
    Tree { nodes: b.nodes }
}

pub fn fit_forest(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Result<Forest, LinkPredError> {
    params.validate()?;
    if x.len() != y.len() || x.is_empty() {
        return Err(LinkPredError::InvalidSpec("feature and label counts differ or are empty".into()));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(LinkPredError::DegenerateLabels);
    }
    let trees = (0..params.trees as u64).into_par_iter().map(|t| fit_tree(x, y, params, seed, t)).collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain CART: exhaustive split search minimizing weighted Gini impurity.
    enum Oracle {
        Leaf(bool),
        Split(usize, f64, Box<Oracle>, Box<Oracle>),
    }

    fn oracle_tree(x: &[Vec<f64>], y: &[bool], idx: &[usize]) -> Oracle {
        let pos = idx.iter().filter(|&&i| y[i]).count() as i128;
        let neg = idx.len() as i128 - pos;
        if pos == 0 || neg == 0 || idx.len() < 2 {
            return Oracle::Leaf(pos >= neg);
        }
        // impurity·nL·nR·n = nL·nR·n - n·(A·nR + B·nL); minimize (nL·nR·n - n·(...)) / (nL·nR)
        let mut best: Option<(i128, i128, usize, f64)> = None;
        for f in 0..x[0].len() {
            let mut values: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let t = if t >= w[1] || t < w[0] { w[0] } else { t };
                let (mut l, mut r) = ([0i128; 2], [0i128; 2]);
                for &i in idx {
                    if x[i][f] <= t {
                        l[y[i] as usize] += 1;
                    } else {
                        r[y[i] as usize] += 1;
                    }
                }
                let (nl, nr) = (l[0] + l[1], r[0] + r[1]);
                let gini_l = nl * nl - l[0] * l[0] - l[1] * l[1];
                let gini_r = nr * nr - r[0] * r[0] - r[1] * r[1];
                let (num, den) = (gini_l * nr + gini_r * nl, nl * nr);
                if best.is_none_or(|(bn, bd, _, _)| num * bd < bn * den) {
                    best = Some((num, den, f, t));
                }
            }
        }
        match best {
            None => Oracle::Leaf(pos >= neg),
            Some((_, _, f, t)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
                Oracle::Split(f, t, Box::new(oracle_tree(x, y, &l)), Box::new(oracle_tree(x, y, &r)))
            }
        }
    }

    fn oracle_predict(t: &Oracle, row: &[f64]) -> bool {
        match t {
            Oracle::Leaf(p) => *p,
            Oracle::Split(f, th, l, r) => oracle_predict(if row[*f] <= *th { l } else { r }, row),
        }
    }

    fn noisy(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut r = rng::indexed(seed, 7);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (r.gen_range(0..8) as f64) / 2.0).collect()).collect();
        let y = x.iter().map(|p| p[0] + p[1] > 3.5 || r.gen_bool(0.15)).collect();
        (x, y)
    }

    #[test]
    fn single_tree_equals_plain_cart() {
        let params = ForestParams { trees: 1, max_features: MaxFeatures::All, bootstrap: false, ..Default::default() };
        for seed in 0..5 {
            let (x, y) = noisy(seed, 60, 3);
            let forest = fit_forest(&x, &y, &params, seed).unwrap();
            let idx: Vec<usize> = (0..x.len()).collect();
            let oracle = oracle_tree(&x, &y, &idx);
            let mut r = rng::indexed(seed, 99);
            let probes: Vec<Vec<f64>> =
                (0..500).map(|_| (0..3).map(|_| r.gen_range(-0.5..4.5)).collect()).chain(x.clone()).collect();
            for p in &probes {
                assert_eq!(forest.trees[0].predict(p), oracle_predict(&oracle, p));
            }
        }
    }

    #[test]
    fn memorizes_distinct_points() {
        let mut r = rng::indexed(1, 1);
        let x: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<bool> = (0..80).map(|_| r.gen_bool(0.5)).collect();
        let params = ForestParams { trees: 10, bootstrap: false, max_features: MaxFeatures::Sqrt, ..Default::default() };
        let f = fit_forest(&x, &y, &params, 3).unwrap();
        for (p, &l) in x.iter().zip(&y) {
            assert_eq!(f.score(p) >= 0.5, l);
        }
    }

    #[test]
    fn deterministic_and_vote_fractions() {
        let (x, y) = noisy(4, 50, 5);
        let params = ForestParams { trees: 7, ..Default::default() };
        let a = fit_forest(&x, &y, &params, 11).unwrap();
        let b = fit_forest(&x, &y, &params, 11).unwrap();
        assert_eq!(a, b);
        for p in &x {
            let s = a.score(p);
            assert!((s * 7.0 - (s * 7.0).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_limit_and_degenerate_labels() {
        let (x, y) = noisy(2, 50, 3);
        let params = ForestParams { trees: 3, max_depth: Some(2), ..Default::default() };
        let f = fit_forest(&x, &y, &params, 0).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 2));
        assert!(matches!(fit_forest(&x, &[true; 50], &params, 0), Err(LinkPredError::DegenerateLabels)));
    }

    #[test]
    fn tied_leaf_votes_positive() {
        let x = vec![vec![1.0], vec![1.0]];
        let y = vec![true, false];
        let params = ForestParams { trees: 1, bootstrap: false, max_features: MaxFeatures::All, ..Default::default() };
        let f = fit_forest(&x, &y, &params, 0).unwrap();
        assert_eq!(f.score(&[1.0]), 1.0);
    }
}
