use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use log::debug;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{build_vocab, keep_probability, Vocabulary};
use crate::util::{dot, sigmoid};
use crate::{Error, Result};

/// How negative listings are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeSampling {
    /// Proportional to `count^0.75`.
    Unigram,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub negative_sampling: NegativeSampling,
    pub seed: u64,
    /// 1 trains deterministically; more threads share the matrices without locks.
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample_threshold: 1e-4,
            min_count: 5,
            negative_sampling: NegativeSampling::Unigram,
            seed: 0,
            threads: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dim > 0
            && self.window >= 1
            && self.negatives >= 1
            && self.epochs > 0
            && self.learning_rate > 0.0
            && self.subsample_threshold > 0.0
            && self.min_count > 0
            && self.threads > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid skip-gram config: {self:?}")))
        }
    }
}

/// Input and output embedding matrices over a listing vocabulary, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    vocabulary: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl SkipGramModel {
    pub fn from_parts(vocabulary: Vocabulary, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        let n = vocabulary.len() * dim;
        if input.len() != n || output.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {} x {dim} matrices, got {} and {} values",
                vocabulary.len(),
                input.len(),
                output.len()
            )));
        }
        if input.iter().chain(&output).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite embedding value".into()));
        }
        Ok(SkipGramModel { vocabulary, dim, input, output })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_vector(&self, idx: usize) -> &[f64] {
        &self.input[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn output_vector(&self, idx: usize) -> &[f64] {
        &self.output[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn input_matrix(&self) -> &[f64] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f64] {
        &self.output
    }

    /// The listing's representation: its input vector.
    pub fn vector(&self, listing: &str) -> Option<&[f64]> {
        self.vocabulary.index_of(listing).map(|i| self.input_vector(i))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.vector(a)?, self.vector(b)?))
    }

    /// Input vectors keyed by listing id.
    pub fn to_table(&self) -> EmbeddingTable {
        let mut table = EmbeddingTable::new(self.dim);
        for (i, id) in self.vocabulary.ids().iter().enumerate() {
            table.insert(id.clone(), self.input_vector(i).to_vec()).expect("dimensions agree");
        }
        table
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Dense id-keyed vectors, as stored in embedding files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Inserts or replaces the vector for `id`.
    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "vector for `{id}` has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        match self.index.get(&id) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(&vector),
            None => {
                self.index.insert(id.clone(), self.ids.len());
                self.ids.push(id);
                self.data.extend_from_slice(&vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), &self.data[i * self.dim..(i + 1) * self.dim]))
    }

    /// Copy with every coordinate shifted and scaled to zero mean and unit
    /// variance across rows. Constant coordinates are only centered.
    pub fn standardized(&self) -> EmbeddingTable {
        let n = self.len();
        if n == 0 {
            return self.clone();
        }
        let mut out = self.clone();
        for j in 0..self.dim {
            let col = || (0..n).map(|i| self.data[i * self.dim + j]);
            let mean = col().sum::<f64>() / n as f64;
            let var = col().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
            for i in 0..n {
                out.data[i * self.dim + j] = (self.data[i * self.dim + j] - mean) * scale;
            }
        }
        out
    }
}

/// Row storage the update kernel writes through: exclusive slices for
/// deterministic training, relaxed atomics for lock-free parallel training.
trait Rows {
    fn read(&self, row: usize, out: &mut [f64]);
    fn add(&mut self, row: usize, delta: &[f64], scale: f64);
}

struct DenseRows<'a> {
    data: &'a mut [f64],
    dim: usize,
}

impl Rows for DenseRows<'_> {
    fn read(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    fn add(&mut self, row: usize, delta: &[f64], scale: f64) {
        for (x, d) in self.data[row * self.dim..(row + 1) * self.dim].iter_mut().zip(delta) {
            *x += scale * d;
        }
    }
}

/// Racy updates: concurrent writers may overwrite each other's increments.
struct SharedRows<'a> {
    data: &'a [AtomicU64],
    dim: usize,
}

impl Rows for SharedRows<'_> {
    fn read(&self, row: usize, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, row: usize, delta: &[f64], scale: f64) {
        for (a, d) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(delta) {
            let v = f64::from_bits(a.load(Ordering::Relaxed)) + scale * d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Scratch {
    center: Vec<f64>,
    context: Vec<f64>,
    grad: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch { center: vec![0.0; dim], context: vec![0.0; dim], grad: vec![0.0; dim] }
    }
}

/// `-ln(sigmoid(x))` without overflow.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// One gradient-ascent step on `ln σ(out_pos·in_c) + Σ ln(1 − σ(out_neg·in_c))`.
/// Returns the negated objective before the step.
fn sgns_update<I: Rows, O: Rows>(
    input: &mut I,
    output: &mut O,
    center: usize,
    positive: usize,
    negatives: &[usize],
    lr: f64,
    s: &mut Scratch,
) -> f64 {
    input.read(center, &mut s.center);
    s.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((positive, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        output.read(target, &mut s.context);
        let score = dot(&s.context, &s.center);
        loss += if label == 1.0 { softplus_neg(score) } else { softplus_neg(-score) };
        let g = (label - sigmoid(score)) * lr;
        for (acc, c) in s.grad.iter_mut().zip(&s.context) {
            *acc += g * c;
        }
        output.add(target, &s.center, g);
    }
    input.add(center, &s.grad, 1.0);
    loss
}

/// Applies one negative-sampling update for a `(center, positive)` pair in place.
/// Only the center's input row and the touched output rows change. Returns the
/// loss before the update.
pub fn sgns_step(model: &mut SkipGramModel, center: usize, positive: usize, negatives: &[usize], lr: f64) -> f64 {
    let dim = model.dim;
    let mut scratch = Scratch::new(dim);
    let mut input = DenseRows { data: &mut model.input, dim };
    let mut output = DenseRows { data: &mut model.output, dim };
    sgns_update(&mut input, &mut output, center, positive, negatives, lr, &mut scratch)
}

/// The per-pair objective maximized by [`sgns_step`].
pub fn sgns_objective(model: &SkipGramModel, center: usize, positive: usize, negatives: &[usize]) -> f64 {
    let c = model.input_vector(center);
    let pos = -softplus_neg(dot(model.output_vector(positive), c));
    let neg: f64 = negatives.iter().map(|&n| -softplus_neg(-dot(model.output_vector(n), c))).sum();
    pos + neg
}

/// Full softmax over every listing as context of `center`.
pub fn softmax_distribution(model: &SkipGramModel, center: usize) -> Vec<f64> {
    let c = model.input_vector(center);
    let logits: Vec<f64> = (0..model.vocabulary.len()).map(|l| dot(model.output_vector(l), c)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax_probability(model: &SkipGramModel, center: usize, context: usize) -> f64 {
    softmax_distribution(model, center)[context]
}

/// `(center, context)` pairs for every kept position and every kept neighbour
/// within `window` positions of it.
pub fn generate_pairs(sequence: &[usize], window: usize, keep: &[bool]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..sequence.len() {
        if !keep[i] {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(sequence.len() - 1);
        for j in lo..=hi {
            if j != i && keep[j] {
                pairs.push((sequence[i], sequence[j]));
            }
        }
    }
    pairs
}

enum Sampler {
    Weighted(WeightedIndex<f64>),
    Uniform(usize),
}

impl Sampler {
    fn new(kind: NegativeSampling, vocab: &Vocabulary) -> Self {
        match kind {
            NegativeSampling::Uniform => Sampler::Uniform(vocab.len()),
            NegativeSampling::Unigram => Sampler::Weighted(
                WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75))).expect("counts are positive"),
            ),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            Sampler::Weighted(w) => w.sample(rng),
            Sampler::Uniform(n) => rng.random_range(0..*n),
        }
    }

    fn fill<R: Rng>(&self, rng: &mut R, positive: usize, out: &mut Vec<usize>, k: usize, vocab_len: usize) {
        out.clear();
        if vocab_len < 2 {
            return;
        }
        while out.len() < k {
            let n = self.sample(rng);
            if n != positive {
                out.push(n);
            }
        }
    }
}

struct Trainer<'a> {
    config: &'a SkipGramConfig,
    vocab: &'a Vocabulary,
    keep: Vec<f64>,
    sampler: Sampler,
    total_work: f64,
}

impl Trainer<'_> {
    fn learning_rate(&self, done: u64) -> f64 {
        let progress = done as f64 / self.total_work;
        self.config.learning_rate * (1.0 - progress).max(1e-4)
    }

    /// Trains on one sequence; returns (summed loss, pair count).
    #[allow(clippy::too_many_arguments)]
    fn sequence<I: Rows, O: Rows, R: Rng>(
        &self,
        seq: &[usize],
        lr: f64,
        input: &mut I,
        output: &mut O,
        rng: &mut R,
        scratch: &mut Scratch,
        negs: &mut Vec<usize>,
    ) -> (f64, usize) {
        let mask: Vec<bool> = seq.iter().map(|&l| rng.random::<f64>() < self.keep[l]).collect();
        let pairs = generate_pairs(seq, self.config.window, &mask);
        let mut loss = 0.0;
        for &(center, context) in &pairs {
            self.sampler.fill(rng, context, negs, self.config.negatives, self.vocab.len());
            loss += sgns_update(input, output, center, context, negs, lr, scratch);
        }
        (loss, pairs.len())
    }
}

/// Trains listing embeddings on listing sequences (one per session).
///
/// Input vectors start uniform in `[-0.5/d, 0.5/d]`, output vectors at zero.
/// With `threads == 1` the result is a pure function of the inputs and seed.
pub fn train_skipgram<S: AsRef<str>>(sequences: &[Vec<S>], config: &SkipGramConfig) -> Result<SkipGramModel> {
    config.validate()?;
    let vocab = build_vocab(sequences, config.min_count)?;
    let dim = config.dim;
    let encoded: Vec<Vec<usize>> = sequences.iter().map(|s| vocab.encode(s)).filter(|s| !s.is_empty()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..vocab.len() * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let mut output = vec![0.0; vocab.len() * dim];

    let tokens: usize = encoded.iter().map(Vec::len).sum();
    let trainer = Trainer {
        config,
        vocab: &vocab,
        keep: (0..vocab.len())
            .map(|i| keep_probability(vocab.count(i), vocab.total(), config.subsample_threshold))
            .collect(),
        sampler: Sampler::new(config.negative_sampling, &vocab),
        total_work: (config.epochs * tokens).max(1) as f64,
    };

    let mut order: Vec<usize> = (0..encoded.len()).collect();
    if config.threads == 1 {
        let mut scratch = Scratch::new(dim);
        let mut negs = Vec::with_capacity(config.negatives);
        let mut done = 0u64;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut in_rows = DenseRows { data: &mut input, dim };
            let mut out_rows = DenseRows { data: &mut output, dim };
            let (mut loss, mut pairs) = (0.0, 0usize);
            for &s in &order {
                let lr = trainer.learning_rate(done);
                let (l, p) =
                    trainer.sequence(&encoded[s], lr, &mut in_rows, &mut out_rows, &mut rng, &mut scratch, &mut negs);
                loss += l;
                pairs += p;
                done += encoded[s].len() as u64;
            }
            debug!("skip-gram epoch {epoch}: {pairs} pairs, mean loss {:.4}", loss / pairs.max(1) as f64);
        }
    } else {
        let shared_in: Vec<AtomicU64> = input.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        let shared_out: Vec<AtomicU64> = output.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        let done = AtomicU64::new(0);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            std::thread::scope(|scope| {
                for worker in 0..config.threads {
                    let (order, encoded, trainer, done) = (&order, &encoded, &trainer, &done);
                    let (shared_in, shared_out) = (&shared_in, &shared_out);
                    let seed = config.seed ^ ((epoch as u64) << 32) ^ (worker as u64 + 1);
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let mut in_rows = SharedRows { data: shared_in, dim };
                        let mut out_rows = SharedRows { data: shared_out, dim };
                        let mut scratch = Scratch::new(dim);
                        let mut negs = Vec::new();
                        for &s in order.iter().skip(worker).step_by(config.threads) {
                            let lr = trainer.learning_rate(done.load(Ordering::Relaxed));
                            trainer.sequence(
                                &encoded[s],
                                lr,
                                &mut in_rows,
                                &mut out_rows,
                                &mut rng,
                                &mut scratch,
                                &mut negs,
                            );
                            done.fetch_add(encoded[s].len() as u64, Ordering::Relaxed);
                        }
                    });
                }
            });
        }
        input = shared_in.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        output = shared_out.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
    }

    SkipGramModel::from_parts(vocab, dim, input, output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns_have_unit_moments() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a".into(), vec![1.0, 5.0]).unwrap();
        t.insert("b".into(), vec![3.0, 5.0]).unwrap();
        t.insert("c".into(), vec![8.0, 5.0]).unwrap();
        let s = t.standardized();
        let col: Vec<f64> = s.iter().map(|(_, v)| v[0]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|(_, v)| v[1] == 0.0));
        assert_eq!(s.get("b").map(|v| v.len()), Some(2));
    }
    use std::collections::BTreeSet;

    fn toy_model(input: Vec<f64>, output: Vec<f64>, dim: usize) -> SkipGramModel {
        let n = input.len() / dim;
        let seqs = vec![(0..n).map(|i| format!("l{i}")).collect::<Vec<_>>()];
        SkipGramModel::from_parts(build_vocab(&seqs, 1).unwrap(), dim, input, output).unwrap()
    }

    #[test]
    fn pairs_for_short_sequences() {
        let got: BTreeSet<_> = generate_pairs(&[0, 1], 1, &[true, true]).into_iter().collect();
        assert_eq!(got, BTreeSet::from([(0, 1), (1, 0)]));
        assert!(generate_pairs(&[7], 3, &[true]).is_empty());
        assert!(generate_pairs(&[0, 1], 1, &[true, false]).is_empty());
    }

    #[test]
    fn pairs_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let seq: Vec<usize> = (0..10).map(|_| rng.random_range(0..6)).collect();
            let keep: Vec<bool> = (0..10).map(|_| rng.random_bool(0.8)).collect();
            let mut brute = Vec::new();
            for i in 0..10i64 {
                for j in -3i64..=3 {
                    let k = i + j;
                    if j != 0 && (0..10).contains(&k) && keep[i as usize] && keep[k as usize] {
                        brute.push((seq[i as usize], seq[k as usize]));
                    }
                }
            }
            let mut got = generate_pairs(&seq, 3, &keep);
            got.sort_unstable();
            brute.sort_unstable();
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn uniform_logits_give_uniform_softmax() {
        let m = toy_model(vec![0.3, -0.1, 0.2, 0.5, 1.0, 1.0], vec![0.4, 0.4, 0.4, 0.4, 0.4, 0.4], 2);
        for c in 0..3 {
            for p in softmax_distribution(&m, c) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_matches_direct_sum() {
        let m = toy_model(vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5], vec![1.0, 0.0, -0.5, 2.0, 0.3, 0.3], 2);
        let c = m.input_vector(1).to_vec();
        let e: Vec<f64> = (0..3).map(|l| dot(m.output_vector(l), &c).exp()).collect();
        let z: f64 = e.iter().sum();
        for (l, el) in e.iter().enumerate() {
            assert!((softmax_probability(&m, 1, l) - el / z).abs() < 1e-15);
        }
        let total: f64 = softmax_distribution(&m, 2).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_do_not_move() {
        let mut m = toy_model(vec![0.0; 6], vec![0.0; 6], 2);
        let before = m.clone();
        sgns_step(&mut m, 0, 1, &[2], 0.1);
        assert_eq!(m, before);
    }

    #[test]
    fn step_matches_hand_gradient() {
        // center c = (1, 2), positive o+ = (0.5, -0.25), negative o- = (-1, 0.5).
        let mut m = toy_model(vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.5, -0.25, -1.0, 0.5], 2);
        let lr = 0.1;
        let s_pos: f64 = 0.5 * 1.0 + -0.25 * 2.0; // 0
        let s_neg: f64 = -1.0 + 0.5 * 2.0; // 0
        let g_pos = lr * (1.0 - 1.0 / (1.0 + (-s_pos).exp()));
        let g_neg = lr * (0.0 - 1.0 / (1.0 + (-s_neg).exp()));
        let new_center = [1.0 + g_pos * 0.5 - g_neg, 2.0 + g_pos * -0.25 + g_neg * 0.5];
        let new_pos = [0.5 + g_pos * 1.0, -0.25 + g_pos * 2.0];
        let new_neg = [-1.0 + g_neg * 1.0, 0.5 + g_neg * 2.0];
        sgns_step(&mut m, 0, 1, &[2], lr);
        for (a, b) in m.input_vector(0).iter().zip(new_center) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in m.output_vector(1).iter().zip(new_pos) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in m.output_vector(2).iter().zip(new_neg) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(m.input_vector(1), &[0.0, 0.0]);
        assert_eq!(m.output_vector(0), &[0.0, 0.0]);
    }

    #[test]
    fn step_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let output: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut m = toy_model(input, output, 4);
        let before = -sgns_objective(&m, 0, 1, &[2, 3]);
        let reported = sgns_step(&mut m, 0, 1, &[2, 3], 0.01);
        assert!((reported - before).abs() < 1e-12);
        assert!(-sgns_objective(&m, 0, 1, &[2, 3]) <= before);
    }

    #[test]
    fn single_listing_corpus_stays_at_init() {
        let seqs = vec![vec!["a"]; 10];
        let config = SkipGramConfig { min_count: 1, dim: 4, ..Default::default() };
        let m = train_skipgram(&seqs, &config).unwrap();
        assert_eq!(m.vocabulary().len(), 1);
        assert!(m.output_matrix().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let expected: Vec<f64> = (0..4).map(|_| rng.random_range(-0.125..0.125)).collect();
        assert_eq!(m.input_vector(0), expected.as_slice());
    }

    #[test]
    fn training_is_deterministic() {
        let seqs: Vec<Vec<String>> =
            (0..200).map(|i| (0..6).map(|j| format!("l{}", (i * 7 + j * 3) % 13)).collect()).collect();
        let config = SkipGramConfig { min_count: 1, dim: 8, epochs: 2, seed: 9, ..Default::default() };
        let a = train_skipgram(&seqs, &config).unwrap();
        let b = train_skipgram(&seqs, &config).unwrap();
        assert_eq!(a.input_matrix(), b.input_matrix());
        assert_eq!(a.output_matrix(), b.output_matrix());
    }

    #[test]
    fn parallel_training_runs() {
        let seqs: Vec<Vec<String>> = (0..400).map(|i| (0..6).map(|j| format!("l{}", (i + j) % 20)).collect()).collect();
        let config = SkipGramConfig { min_count: 1, dim: 8, epochs: 2, threads: 4, ..Default::default() };
        let m = train_skipgram(&seqs, &config).unwrap();
        assert!(m.input_matrix().iter().all(|v| v.is_finite()));
        assert_eq!(m.vocabulary().len(), 20);
    }

    #[test]
    fn table_holds_input_vectors() {
        let m = toy_model(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4], 2);
        let t = m.to_table();
        assert_eq!(t.get("l1"), Some(&[3.0, 4.0][..]));
        assert_eq!(t.len(), 2);
        assert!(t.get("zz").is_none());
    }
}
