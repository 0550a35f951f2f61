use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sgns::{dot, score_gradient, score_loss};
use super::{EmbedError, EmbeddingModel, TrainHyperparams, Vocabulary};
use crate::rng;

/// Seeded starting point: input rows uniform in `[-0.5/d, 0.5/d]`.
pub fn initial_vectors(vocab_len: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "embedding/init");
    let half = 0.5 / dim as f64;
    (0..vocab_len * dim).map(|_| r.gen_range(-half..=half)).collect()
}

/// Shared weight matrices. Parallel workers write through the raw pointers
/// without synchronization; each write is a plain `f64` store.
struct Weights {
    input: *mut f64,
    output: *mut f64,
    dim: usize,
}

unsafe impl Send for Weights {}
unsafe impl Sync for Weights {}

struct Schedule {
    initial: f64,
    floor: f64,
    total: u64,
}

impl Schedule {
    fn rate(&self, processed: u64) -> f64 {
        let progress = processed as f64 / self.total.max(1) as f64;
        (self.initial * (1.0 - progress)).max(self.floor)
    }
}

struct Worker<'a> {
    weights: &'a Weights,
    noise: &'a WeightedIndex<f64>,
    hp: &'a TrainHyperparams,
    schedule: &'a Schedule,
    processed: &'a AtomicU64,
}

impl Worker<'_> {
    fn run(&self, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng, grad: &mut [f64]) {
        let dim = self.weights.dim;
        for sentence in sentences {
            let base = self.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
            for (pos, &center) in sentence.iter().enumerate() {
                let lr = self.schedule.rate(base + pos as u64);
                let reach = self.hp.window - rng.gen_range(0..self.hp.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                // SAFETY: rows are in bounds of the vocabulary-sized matrices.
                let v = unsafe { self.weights.input.add(center as usize * dim) };
                for (cpos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    unsafe { self.update(v, context, true, lr, grad) };
                    for _ in 0..self.hp.negatives {
                        let noise = loop {
                            let n = self.noise.sample(rng) as u32;
                            if n != context {
                                break n;
                            }
                        };
                        unsafe { self.update(v, noise, false, lr, grad) };
                    }
                    for (k, g) in grad.iter().enumerate() {
                        unsafe { *v.add(k) -= lr * g };
                    }
                }
            }
        }
    }

    /// Steps one output row and accumulates the input gradient into `grad`.
    unsafe fn update(&self, v: *mut f64, token: u32, is_context: bool, lr: f64, grad: &mut [f64]) {
        let dim = self.weights.dim;
        let u = self.weights.output.add(token as usize * dim);
        let mut score = 0.0;
        for k in 0..dim {
            score += *v.add(k) * *u.add(k);
        }
        let g = score_gradient(score, is_context);
        for (k, acc) in grad.iter_mut().enumerate() {
            *acc += g * *u.add(k);
            *u.add(k) -= lr * g * *v.add(k);
        }
    }
}

const EVAL_PAIRS: usize = 256;

/// Up to `limit` (target, context) pairs at full window, evenly spaced over
/// the corpus.
fn evaluation_pairs(sentences: &[Vec<u32>], window: usize, limit: usize) -> Vec<(u32, u32)> {
    let mut all = Vec::new();
    for s in sentences {
        for (pos, &center) in s.iter().enumerate() {
            let lo = pos.saturating_sub(window);
            let hi = (pos + window).min(s.len() - 1);
            for (cpos, &context) in s.iter().enumerate().take(hi + 1).skip(lo) {
                if cpos != pos {
                    all.push((center, context));
                }
            }
        }
    }
    if all.len() <= limit {
        return all;
    }
    (0..limit).map(|i| all[i * all.len() / limit]).collect()
}

/// Mean pair loss with the noise term replaced by its expectation under the
/// noise distribution conditioned on excluding the context token.
fn expected_loss(input: &[f64], output: &[f64], dim: usize, pairs: &[(u32, u32)], noise: &[f64], negatives: usize) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let row = |m: &'_ [f64], i: u32| -> Vec<f64> { m[i as usize * dim..(i as usize + 1) * dim].to_vec() };
    let mut total = 0.0;
    for &(center, context) in pairs {
        let v = row(input, center);
        let mut loss = score_loss(dot(&v, &row(output, context)), true);
        let rest = 1.0 - noise[context as usize];
        if rest > 0.0 {
            let mut expected = 0.0;
            for (n, p) in noise.iter().enumerate() {
                if n as u32 != context {
                    expected += p * score_loss(dot(&v, &output[n * dim..(n + 1) * dim]), false);
                }
            }
            loss += negatives as f64 * expected / rest;
        }
        total += loss;
    }
    total / pairs.len() as f64
}

/// Trains skip-gram vectors over whitespace-tokenized `lines`.
///
/// Tokens missing from `vocab` are skipped. With `hp.deterministic` the
/// result is a pure function of the inputs and `seed`.
pub fn train_skipgram<S: AsRef<str>>(
    lines: &[S],
    vocab: &Vocabulary,
    dim: usize,
    hp: &TrainHyperparams,
    seed: u64,
) -> Result<EmbeddingModel, EmbedError> {
    if dim == 0 {
        return Err(EmbedError::InvalidDimension(dim));
    }
    hp.validate()?;
    if vocab.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let sentences = vocab.encode(lines.iter().map(|l| l.as_ref()));
    let n = vocab.len();
    let mut input = initial_vectors(n, dim, seed);
    let mut output = vec![0.0; n * dim];

    let weights_for_noise: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(hp.noise_exponent)).collect();
    let noise = WeightedIndex::new(&weights_for_noise).map_err(|_| EmbedError::EmptyCorpus)?;

    let tokens_per_epoch: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let schedule = Schedule {
        initial: hp.learning_rate,
        floor: hp.min_learning_rate(),
        total: tokens_per_epoch * hp.epochs as u64,
    };
    let workers = if hp.deterministic {
        1
    } else if hp.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        hp.workers
    }
    .min(sentences.len().max(1));

    let weights = Weights { input: input.as_mut_ptr(), output: output.as_mut_ptr(), dim };
    let processed = AtomicU64::new(0);
    let worker = Worker { weights: &weights, noise: &noise, hp, schedule: &schedule, processed: &processed };
    let mut rngs: Vec<ChaCha8Rng> = (0..workers).map(|w| rng::stream(seed, &format!("embedding/train/{w}"))).collect();
    let chunk = sentences.len().div_ceil(workers).max(1);

    let total_weight: f64 = weights_for_noise.iter().sum();
    let noise_probs: Vec<f64> = weights_for_noise.iter().map(|w| w / total_weight).collect();
    let eval_pairs = evaluation_pairs(&sentences, hp.window, EVAL_PAIRS);

    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    for _ in 0..hp.epochs {
        if workers == 1 {
            worker.run(&sentences, &mut rngs[0], &mut vec![0.0; dim]);
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .zip(rngs.iter_mut())
                    .map(|(part, r)| {
                        let worker = &worker;
                        s.spawn(move || worker.run(part, r, &mut vec![0.0; dim]))
                    })
                    .collect();
                for h in handles {
                    h.join().expect("embedding worker panicked");
                }
            })
        }
        // SAFETY: all workers have joined; no outstanding writers.
        let (inp, out) = unsafe {
            (
                std::slice::from_raw_parts(weights.input, n * dim),
                std::slice::from_raw_parts(weights.output, n * dim),
            )
        };
        epoch_losses.push(expected_loss(inp, out, dim, &eval_pairs, &noise_probs, hp.negatives));
    }

    let mut model = EmbeddingModel::from_rows(vocab.tokens().to_vec(), dim, input)?;
    model.output = output;
    model.hyperparams = Some(hp.clone());
    model.seed = Some(seed);
    model.epoch_losses = epoch_losses;
    Ok(model)
}
