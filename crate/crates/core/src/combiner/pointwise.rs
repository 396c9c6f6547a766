//! Parameter-free combiners with a linear booking readout.

use ndarray::{Array1, ArrayView1, ArrayView2};

use super::{check_sequence, combine_average, combine_random, Network, Readout};
use crate::util::stable_hash;
use crate::Result;

/// Seed for the random pick of `seq`: `seed` mixed with a hash of the values.
pub fn sequence_seed(seed: u64, seq: ArrayView2<f64>) -> u64 {
    seed ^ stable_hash(seq.iter().flat_map(|v| v.to_bits().to_le_bytes()))
}

/// Logistic regression on one uniformly picked listing vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModel {
    pub seed: u64,
    pub readout: Readout,
}

/// Logistic regression on the mean listing vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageModel {
    pub readout: Readout,
}

impl RandomModel {
    pub fn zeros(dim: usize, seed: u64) -> Self {
        RandomModel { seed, readout: Readout::zeros(dim) }
    }
}

impl AverageModel {
    pub fn zeros(dim: usize) -> Self {
        AverageModel { readout: Readout::zeros(dim) }
    }
}

fn linear_backprop(readout: &Readout, v: Array1<f64>, dlogit: f64) -> (f64, Readout) {
    let logit = readout.logit(v.view());
    (logit, Readout { weights: v * dlogit, bias: dlogit })
}

macro_rules! readout_tensors {
    () => {
        fn output_dim(&self) -> usize {
            self.readout.weights.len()
        }

        fn input_dim(&self) -> usize {
            self.readout.weights.len()
        }

        fn logit(&self, seq: ArrayView2<f64>) -> Result<f64> {
            let v = self.embedding(seq)?;
            Ok(self.readout.logit(ArrayView1::from(&v)))
        }

        fn tensors(&self) -> Vec<&[f64]> {
            vec![self.readout.weights.as_slice().expect("standard layout"), std::slice::from_ref(&self.readout.bias)]
        }

        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![
                self.readout.weights.as_slice_mut().expect("standard layout"),
                std::slice::from_mut(&mut self.readout.bias),
            ]
        }
    };
}

impl Network for RandomModel {
    readout_tensors!();

    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_sequence(seq, self.input_dim())?;
        combine_random(seq, sequence_seed(self.seed, seq))
    }

    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)> {
        let (logit, readout) = linear_backprop(&self.readout, self.embedding(seq)?, dlogit);
        Ok((logit, RandomModel { seed: self.seed, readout }))
    }

    fn zeros_like(&self) -> Self {
        RandomModel::zeros(self.input_dim(), self.seed)
    }
}

impl Network for AverageModel {
    readout_tensors!();

    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_sequence(seq, self.input_dim())?;
        combine_average(seq)
    }

    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)> {
        let (logit, readout) = linear_backprop(&self.readout, self.embedding(seq)?, dlogit);
        Ok((logit, AverageModel { readout }))
    }

    fn zeros_like(&self) -> Self {
        AverageModel::zeros(self.input_dim())
    }
}
