//! Traveler embeddings composed from the listing embeddings a traveler
//! interacted with, and the booking classifiers trained on top of them.

mod attention;
mod dan;
mod io;
mod lstm;
mod pointwise;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use attention::{attention_forward, AttentionModel, AttentionParams};
pub use dan::{contracted_width, DanForward, DanParams};
pub use io::{read_params, write_params};
pub use lstm::{lstm_forward, LstmModel, LstmParams, LstmTrace, Readout};
pub use pointwise::{sequence_seed, AverageModel, RandomModel};
pub use train::{bce, train_combiner, train_network, CombinerTrainConfig, SequenceExample, TrainReport};

use crate::embedding::EmbeddingTable;
use crate::{Error, Result};

/// Sequences longer than this keep only their most recent listings.
pub const MAX_SEQUENCE_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    Random,
    Average,
    Dan,
    Lstm,
    LstmAttention,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 5] = [
        CombinerKind::Random,
        CombinerKind::Average,
        CombinerKind::Dan,
        CombinerKind::Lstm,
        CombinerKind::LstmAttention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::Random => "random",
            CombinerKind::Average => "average",
            CombinerKind::Dan => "dan",
            CombinerKind::Lstm => "lstm",
            CombinerKind::LstmAttention => "lstm-attention",
        }
    }

    /// Whether the traveler embedding itself is learned.
    pub fn learns_embedding(self) -> bool {
        matches!(self, CombinerKind::Dan | CombinerKind::Lstm | CombinerKind::LstmAttention)
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CombinerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown combiner `{s}`")))
    }
}

/// A differentiable combiner: sequence of listing vectors in, booking logit out.
pub trait Network: Clone + Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn logit(&self, seq: ArrayView2<f64>) -> Result<f64>;
    /// The penultimate representation exported as the traveler embedding.
    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>>;
    /// Logit, and the gradient of `dlogit · logit` with respect to every parameter.
    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)>;
    fn zeros_like(&self) -> Self;
    /// Parameter buffers in a fixed order.
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

pub(crate) fn check_sequence(seq: ArrayView2<f64>, dim: usize) -> Result<()> {
    if seq.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    if seq.ncols() != dim {
        return Err(Error::ShapeMismatch(format!("sequence width {} but network expects {dim}", seq.ncols())));
    }
    Ok(())
}

pub(crate) fn xavier_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

pub(crate) fn xavier_vector<R: Rng>(n: usize, rng: &mut R) -> Array1<f64> {
    let limit = (6.0 / (n + 1) as f64).sqrt();
    Array1::from_shape_simple_fn(n, || rng.random_range(-limit..limit))
}

pub(crate) fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Stacks the vectors of the listings found in `table`, keeping at most the
/// `max_len` most recent ones. `None` if no listing has a vector.
pub fn sequence_matrix<S: AsRef<str>>(table: &EmbeddingTable, listings: &[S], max_len: usize) -> Option<Array2<f64>> {
    let vectors: Vec<&[f64]> = listings.iter().filter_map(|l| table.get(l.as_ref())).collect();
    let start = vectors.len().saturating_sub(max_len);
    let kept = &vectors[start..];
    if kept.is_empty() {
        return None;
    }
    let dim = table.dim();
    let mut m = Array2::zeros((kept.len(), dim));
    for (mut row, v) in m.rows_mut().into_iter().zip(kept) {
        row.assign(&ndarray::ArrayView1::from(*v));
    }
    Some(m)
}

/// One of the rows of `seq`, chosen uniformly with `seed`.
pub fn combine_random(seq: ArrayView2<f64>, seed: u64) -> Result<Array1<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(seq.row(rng.random_range(0..seq.nrows())).to_owned())
}

/// Coordinate-wise mean of the rows of `seq`.
pub fn combine_average(seq: ArrayView2<f64>) -> Result<Array1<f64>> {
    seq.mean_axis(Axis(0)).ok_or(Error::EmptySequence)
}

/// A trained combiner of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum CombinerParams {
    Random(RandomModel),
    Average(AverageModel),
    Dan(DanParams),
    Lstm(LstmModel),
    LstmAttention(AttentionModel),
}

macro_rules! dispatch {
    ($self:expr, $net:ident => $body:expr) => {
        match $self {
            CombinerParams::Random($net) => $body,
            CombinerParams::Average($net) => $body,
            CombinerParams::Dan($net) => $body,
            CombinerParams::Lstm($net) => $body,
            CombinerParams::LstmAttention($net) => $body,
        }
    };
}

impl CombinerParams {
    pub fn kind(&self) -> CombinerKind {
        match self {
            CombinerParams::Random(_) => CombinerKind::Random,
            CombinerParams::Average(_) => CombinerKind::Average,
            CombinerParams::Dan(_) => CombinerKind::Dan,
            CombinerParams::Lstm(_) => CombinerKind::Lstm,
            CombinerParams::LstmAttention(_) => CombinerKind::LstmAttention,
        }
    }

    pub fn input_dim(&self) -> usize {
        dispatch!(self, n => n.input_dim())
    }

    /// Length of exported traveler embeddings.
    pub fn output_dim(&self) -> usize {
        dispatch!(self, n => n.output_dim())
    }

    /// Booking logit.
    pub fn logit(&self, seq: ArrayView2<f64>) -> Result<f64> {
        dispatch!(self, n => n.logit(seq))
    }

    /// Logit recomputed from an exported embedding.
    pub fn readout(&self, embedding: &[f64]) -> f64 {
        match self {
            CombinerParams::Dan(p) => p.readout(embedding),
            CombinerParams::Random(RandomModel { readout, .. })
            | CombinerParams::Average(AverageModel { readout })
            | CombinerParams::Lstm(LstmModel { readout, .. })
            | CombinerParams::LstmAttention(AttentionModel { readout, .. }) => {
                readout.logit(ndarray::ArrayView1::from(embedding))
            }
        }
    }

    /// Traveler embedding of a listing sequence.
    pub fn embed(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        dispatch!(self, n => n.embedding(seq))
    }

    pub fn num_params(&self) -> usize {
        dispatch!(self, n => n.num_params())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravelerEmbedding {
    pub traveler_id: String,
    pub vector: Vec<f64>,
}

pub fn export_traveler_embedding(
    params: &CombinerParams,
    traveler_id: &str,
    seq: ArrayView2<f64>,
) -> Result<TravelerEmbedding> {
    let vector = params.embed(seq)?.to_vec();
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite embedding for `{traveler_id}`")));
    }
    Ok(TravelerEmbedding { traveler_id: traveler_id.to_string(), vector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn random_pick_of_singleton_and_determinism() {
        let one = array![[1.0, 2.0]];
        assert_eq!(combine_random(one.view(), 99).unwrap(), array![1.0, 2.0]);
        let many = Array2::from_shape_fn((9, 2), |(i, j)| (i * 2 + j) as f64);
        assert_eq!(combine_random(many.view(), 5).unwrap(), combine_random(many.view(), 5).unwrap());
        assert!(combine_random(Array2::zeros((0, 2)).view(), 1).is_err());
    }

    #[test]
    fn random_pick_is_uniform() {
        // chi-square goodness of fit, 4 degrees of freedom, critical value 13.277 at 0.01
        let seq = Array2::from_shape_fn((5, 1), |(i, _)| i as f64);
        let mut counts = [0usize; 5];
        for seed in 0..10_000u64 {
            counts[combine_random(seq.view(), seed).unwrap()[0] as usize] += 1;
        }
        let expected = 2000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.277, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn average_basics() {
        let v = array![[0.5, -1.0, 2.0]];
        assert_eq!(combine_average(v.view()).unwrap(), array![0.5, -1.0, 2.0]);
        let pm = array![[0.5, -1.0], [-0.5, 1.0]];
        assert_eq!(combine_average(pm.view()).unwrap(), array![0.0, 0.0]);
        assert!(combine_average(Array2::zeros((0, 3)).view()).is_err());
    }

    #[test]
    fn average_matches_naive_sum_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 6;
        let seq = Array2::from_shape_simple_fn((7, d), || rng.random_range(-3.0..3.0));
        let got = combine_average(seq.view()).unwrap();
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..7 {
                s += seq[[i, j]];
            }
            assert!((got[j] - s / 7.0).abs() < 1e-12);
        }
        let reversed = seq.slice(ndarray::s![..;-1, ..]).to_owned();
        let back = combine_average(reversed.view()).unwrap();
        for j in 0..d {
            assert!((got[j] - back[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn export_passthrough_and_dead_dan() {
        let seq = array![[1.0, 3.0], [3.0, 5.0]];
        let avg = CombinerParams::Average(AverageModel::zeros(2));
        assert_eq!(export_traveler_embedding(&avg, "t", seq.view()).unwrap().vector, vec![2.0, 4.0]);
        let dan = CombinerParams::Dan(DanParams::zeros(4));
        let e = export_traveler_embedding(&dan, "t", Array2::ones((3, 4)).view()).unwrap();
        assert_eq!(e.vector, vec![0.0, 0.0]);
    }

    #[test]
    fn export_then_readout_reproduces_logit() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let seq = Array2::from_shape_simple_fn((4, 6), || rng.random_range(-1.0..1.0));
        let models = [
            CombinerParams::Random(RandomModel { seed: 1, readout: Readout::init(6, &mut rng) }),
            CombinerParams::Average(AverageModel { readout: Readout::init(6, &mut rng) }),
            CombinerParams::Dan(DanParams::init(6, &mut rng)),
            CombinerParams::Lstm(LstmModel::init(6, 3, &mut rng)),
            CombinerParams::LstmAttention(AttentionModel::init(6, 3, &mut rng)),
        ];
        for m in &models {
            let e = m.embed(seq.view()).unwrap();
            let logit = m.logit(seq.view()).unwrap();
            assert!((m.readout(e.as_slice().unwrap()) - logit).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_matrix_keeps_recent() {
        let mut t = EmbeddingTable::new(1);
        for i in 0..5 {
            t.insert(format!("l{i}"), vec![i as f64]).unwrap();
        }
        let m = sequence_matrix(&t, &["l0", "zz", "l1", "l2", "l3"], 2).unwrap();
        assert_eq!(m, array![[2.0], [3.0]]);
        assert!(sequence_matrix(&t, &["zz"], 2).is_none());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CombinerKind::ALL {
            assert_eq!(k.name().parse::<CombinerKind>().unwrap(), k);
        }
        assert!("transformer".parse::<CombinerKind>().is_err());
    }
}
