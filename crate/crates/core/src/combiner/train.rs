//! Mini-batch Adagrad on binary cross-entropy with early stopping.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttentionModel, AverageModel, CombinerKind, CombinerParams, DanParams, LstmModel, Network, RandomModel};
use crate::util::sigmoid;
use crate::{Error, Result};

const ADAGRAD_EPS: f64 = 1e-8;
const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombinerTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// LSTM hidden width.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for CombinerTrainConfig {
    fn default() -> Self {
        CombinerTrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.05,
            patience: 3,
            validation_fraction: 0.1,
            hidden: 16,
            seed: 0,
        }
    }
}

impl CombinerTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput("batch_size and hidden must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidInput(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// A traveler's listing vectors, one row per listing, with a booking label.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub sequence: Array2<f64>,
    pub label: f64,
}

impl SequenceExample {
    pub fn new(sequence: Array2<f64>, label: f64) -> Result<Self> {
        if label != 0.0 && label != 1.0 {
            return Err(Error::InvalidLabel(label));
        }
        if sequence.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(SequenceExample { sequence, label })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

/// Binary cross-entropy of probability `p` against `label`.
pub fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

fn mean_loss<N: Network>(net: &N, data: &[SequenceExample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|ex| net.logit(ex.sequence.view()).map(|z| bce(sigmoid(z), ex.label)))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

fn accumulate(into: &mut [&mut [f64]], from: &[&[f64]], scale: f64) {
    for (a, b) in into.iter_mut().zip(from) {
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x += scale * y;
        }
    }
}

/// Trains `net` in place on `train`, early-stopping on `validation` (or on the
/// training loss when `validation` is empty), and keeps the best epoch.
pub fn train_network<N: Network>(
    net: N,
    train: &[SequenceExample],
    validation: &[SequenceExample],
    config: &CombinerTrainConfig,
) -> Result<(N, TrainReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training sequences".into()));
    }
    let mut net = net;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = net.zeros_like();
    let mut report = TrainReport::default();
    let mut best = (f64::INFINITY, net.clone());
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let grads: Vec<N> = batch
                .par_iter()
                .map(|&i| {
                    let ex = &train[i];
                    let z = net.logit(ex.sequence.view())?;
                    Ok(net.backprop(ex.sequence.view(), sigmoid(z) - ex.label)?.1)
                })
                .collect::<Result<_>>()?;
            let mut total = net.zeros_like();
            for g in &grads {
                accumulate(&mut total.tensors_mut(), &g.tensors(), 1.0 / batch.len() as f64);
            }
            let g = total.tensors();
            let mut h = history.tensors_mut();
            let mut p = net.tensors_mut();
            for ((p, h), g) in p.iter_mut().zip(h.iter_mut()).zip(&g) {
                for ((p, h), g) in p.iter_mut().zip(h.iter_mut()).zip(g.iter()) {
                    *h += g * g;
                    *p -= config.learning_rate * g / (h.sqrt() + ADAGRAD_EPS);
                }
            }
        }
        let train_loss = mean_loss(&net, train)?;
        if !train_loss.is_finite() {
            return Err(Error::InvalidInput(format!("training diverged at epoch {epoch}")));
        }
        report.train_loss.push(train_loss);
        let monitored = if validation.is_empty() {
            train_loss
        } else {
            let v = mean_loss(&net, validation)?;
            report.validation_loss.push(v);
            v
        };
        log::debug!("epoch {epoch}: train {train_loss:.5} monitored {monitored:.5}");
        if monitored < best.0 {
            best = (monitored, net.clone());
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if config.epochs == 0 {
        return Ok((net, report));
    }
    Ok((best.1, report))
}

/// Splits off a seeded validation fraction and trains a combiner of `kind`.
/// The random and average kinds train only their linear readout.
pub fn train_combiner(
    kind: CombinerKind,
    data: &[SequenceExample],
    config: &CombinerTrainConfig,
) -> Result<(CombinerParams, TrainReport)> {
    config.validate()?;
    let dim =
        data.first().map(|e| e.sequence.ncols()).ok_or_else(|| Error::InvalidInput("no training sequences".into()))?;
    for ex in data {
        if ex.sequence.ncols() != dim {
            return Err(Error::ShapeMismatch(format!("sequence width {} but expected {dim}", ex.sequence.ncols())));
        }
        if ex.sequence.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        if ex.label != 0.0 && ex.label != 1.0 {
            return Err(Error::InvalidLabel(ex.label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_valid = ((data.len() as f64) * config.validation_fraction).floor() as usize;
    let n_valid = n_valid.min(data.len() - 1);
    let validation: Vec<SequenceExample> = order[..n_valid].iter().map(|&i| data[i].clone()).collect();
    let train: Vec<SequenceExample> = order[n_valid..].iter().map(|&i| data[i].clone()).collect();

    Ok(match kind {
        CombinerKind::Random => {
            let (p, r) = train_network(RandomModel::zeros(dim, config.seed), &train, &validation, config)?;
            (CombinerParams::Random(p), r)
        }
        CombinerKind::Average => {
            let (p, r) = train_network(AverageModel::zeros(dim), &train, &validation, config)?;
            (CombinerParams::Average(p), r)
        }
        CombinerKind::Dan => {
            let (p, r) = train_network(DanParams::init(dim, &mut rng), &train, &validation, config)?;
            (CombinerParams::Dan(p), r)
        }
        CombinerKind::Lstm => {
            let (p, r) = train_network(LstmModel::init(dim, config.hidden, &mut rng), &train, &validation, config)?;
            (CombinerParams::Lstm(p), r)
        }
        CombinerKind::LstmAttention => {
            let init = AttentionModel::init(dim, config.hidden, &mut rng);
            let (p, r) = train_network(init, &train, &validation, config)?;
            (CombinerParams::LstmAttention(p), r)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn flat(net: &impl Network) -> Vec<f64> {
        net.tensors().concat()
    }

    fn set(net: &mut impl Network, k: usize, value: f64) {
        let mut seen = 0;
        for t in net.tensors_mut() {
            if k < seen + t.len() {
                t[k - seen] = value;
                return;
            }
            seen += t.len();
        }
    }

    /// Central differences on the BCE loss against `backprop`.
    fn check_gradient<N: Network>(net: &N, seq: &Array2<f64>, label: f64) {
        let z = net.logit(seq.view()).unwrap();
        let (_, grads) = net.backprop(seq.view(), sigmoid(z) - label).unwrap();
        let analytic = flat(&grads);
        let base = flat(net);
        let h = 1e-6;
        let loss = |n: &N| {
            let z = n.logit(seq.view()).unwrap();
            // exact BCE from the logit, no clamping
            z.max(0.0) - z * label + (-z.abs()).exp().ln_1p()
        };
        for (k, &theta) in base.iter().enumerate() {
            let mut plus = net.clone();
            set(&mut plus, k, theta + h);
            let mut minus = net.clone();
            set(&mut minus, k, theta - h);
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-7);
            let rel = (analytic[k] - numeric).abs() / denom;
            assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric} rel {rel}", analytic[k]);
        }
    }

    fn random_seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((t, d), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn dan_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DanParams::init(4, &mut rng);
        // keep every unit away from the relu kink
        net.expand_bias.fill(0.3);
        net.contract_bias.fill(0.2);
        let seq = random_seq(&mut rng, 3, 4);
        check_gradient(&net, &seq, 1.0);
        check_gradient(&net, &seq, 0.0);
    }

    #[test]
    fn lstm_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = LstmModel::init(3, 4, &mut rng);
        check_gradient(&net, &random_seq(&mut rng, 5, 3), 1.0);
        check_gradient(&net, &random_seq(&mut rng, 1, 3), 0.0);
    }

    #[test]
    fn attention_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = AttentionModel::init(3, 4, &mut rng);
        check_gradient(&net, &random_seq(&mut rng, 6, 3), 1.0);
        check_gradient(&net, &random_seq(&mut rng, 2, 3), 0.0);
    }

    #[test]
    fn bce_reference_points() {
        assert!((bce(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(0.25, 0.0) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(bce(0.0, 1.0).is_finite());
    }

    fn separable(n: usize, d: usize, seed: u64) -> Vec<SequenceExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as f64;
                let shift = if label == 1.0 { 1.0 } else { -1.0 };
                let len = rng.random_range(1..6);
                let seq = Array2::from_shape_simple_fn((len, d), || shift + rng.random_range(-0.3..0.3));
                SequenceExample::new(seq, label).unwrap()
            })
            .collect()
    }

    #[test]
    fn dan_fits_separable_data() {
        let data = separable(200, 4, 5);
        let config = CombinerTrainConfig { validation_fraction: 0.0, patience: 50, ..Default::default() };
        let (params, report) = train_combiner(CombinerKind::Dan, &data, &config).unwrap();
        assert!(report.epochs_run() <= 50);
        let CombinerParams::Dan(net) = params else { panic!() };
        let loss = mean_loss(&net, &data).unwrap();
        assert!(loss < 0.1, "loss {loss}");
    }

    #[test]
    fn lstm_kinds_learn_separable_data() {
        let data = separable(120, 3, 6);
        let config = CombinerTrainConfig { epochs: 30, hidden: 4, ..Default::default() };
        for kind in [CombinerKind::Lstm, CombinerKind::LstmAttention] {
            let (params, report) = train_combiner(kind, &data, &config).unwrap();
            let last = *report.train_loss.last().unwrap();
            assert!(last < report.train_loss[0] || report.train_loss[0] < 0.1);
            assert!(params.logit(data[1].sequence.view()).unwrap() > 0.0);
        }
    }

    #[test]
    fn dan_learns_a_product_that_average_cannot() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<SequenceExample> = (0..600)
            .map(|_| {
                let seq = Array2::from_shape_simple_fn((2, 6), || rng.random_range(-2.0..2.0));
                let m = seq.mean_axis(ndarray::Axis(0)).unwrap();
                SequenceExample::new(seq, if m[0] * m[1] > 0.0 { 1.0 } else { 0.0 }).unwrap()
            })
            .collect();
        let config = CombinerTrainConfig { epochs: 200, patience: 200, validation_fraction: 0.0, ..Default::default() };
        let loss = |kind| {
            let (params, report) = train_combiner(kind, &data, &config).unwrap();
            assert_eq!(params.kind(), kind);
            *report.train_loss.last().unwrap()
        };
        let (avg, dan) = (loss(CombinerKind::Average), loss(CombinerKind::Dan));
        assert!(avg > 0.6, "average loss {avg}");
        assert!(dan < avg - 0.15, "dan {dan} vs average {avg}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(60, 3, 7);
        let config = CombinerTrainConfig { epochs: 5, batch_size: 8, ..Default::default() };
        let a = train_combiner(CombinerKind::Dan, &data, &config).unwrap();
        let b = train_combiner(CombinerKind::Dan, &data, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let data = separable(60, 3, 9);
        let config = CombinerTrainConfig { epochs: 200, patience: 3, validation_fraction: 0.3, ..Default::default() };
        let (_, report) = train_combiner(CombinerKind::Dan, &data, &config).unwrap();
        let best = report.validation_loss[report.best_epoch];
        assert!(report.validation_loss.iter().all(|&v| v >= best));
        if report.stopped_early {
            assert_eq!(report.epochs_run(), report.best_epoch + 1 + config.patience);
        }
    }

    #[test]
    fn rejects_bad_examples() {
        assert!(matches!(SequenceExample::new(Array2::ones((1, 2)), 0.5), Err(Error::InvalidLabel(_))));
        assert!(matches!(SequenceExample::new(Array2::zeros((0, 2)), 1.0), Err(Error::EmptySequence)));
        let mixed = vec![
            SequenceExample::new(Array2::ones((1, 2)), 1.0).unwrap(),
            SequenceExample::new(Array2::ones((1, 3)), 0.0).unwrap(),
        ];
        assert!(train_combiner(CombinerKind::Dan, &mixed, &CombinerTrainConfig::default()).is_err());
    }
}
