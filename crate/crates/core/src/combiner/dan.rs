//! Deep average network: mean of the listing vectors, expanded to `2d` units,
//! contracted to `d/2`, then a linear logit.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{check_sequence, outer, xavier_matrix, xavier_vector, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DanParams {
    /// `2d × d`
    pub expand_weights: Array2<f64>,
    pub expand_bias: Array1<f64>,
    /// `d/2 × 2d`
    pub contract_weights: Array2<f64>,
    pub contract_bias: Array1<f64>,
    pub output_weights: Array1<f64>,
    pub output_bias: f64,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct DanForward {
    pub mean: Array1<f64>,
    pub expanded_pre: Array1<f64>,
    pub expanded: Array1<f64>,
    pub contracted_pre: Array1<f64>,
    /// Exported as the traveler embedding.
    pub hidden: Array1<f64>,
    pub logit: f64,
}

pub fn contracted_width(dim: usize) -> usize {
    (dim / 2).max(1)
}

fn relu(a: Array1<f64>) -> Array1<f64> {
    a.mapv(|x| x.max(0.0))
}

impl DanParams {
    pub fn zeros(dim: usize) -> Self {
        let (wide, narrow) = (2 * dim, contracted_width(dim));
        DanParams {
            expand_weights: Array2::zeros((wide, dim)),
            expand_bias: Array1::zeros(wide),
            contract_weights: Array2::zeros((narrow, wide)),
            contract_bias: Array1::zeros(narrow),
            output_weights: Array1::zeros(narrow),
            output_bias: 0.0,
        }
    }

    pub fn init<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let (wide, narrow) = (2 * dim, contracted_width(dim));
        DanParams {
            expand_weights: xavier_matrix(wide, dim, rng),
            contract_weights: xavier_matrix(narrow, wide, rng),
            output_weights: xavier_vector(narrow, rng),
            ..DanParams::zeros(dim)
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let (wide, dim) = self.expand_weights.dim();
        let narrow = self.contract_weights.nrows();
        let ok = self.expand_bias.len() == wide
            && self.contract_weights.ncols() == wide
            && self.contract_bias.len() == narrow
            && self.output_weights.len() == narrow
            && dim > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("deep average network layers do not chain".into()))
        }
    }

    pub fn forward(&self, seq: ArrayView2<f64>) -> Result<DanForward> {
        self.check_shapes()?;
        check_sequence(seq, self.expand_weights.ncols())?;
        let mean = seq.mean_axis(Axis(0)).expect("non-empty");
        let expanded_pre = self.expand_weights.dot(&mean) + &self.expand_bias;
        let expanded = relu(expanded_pre.clone());
        let contracted_pre = self.contract_weights.dot(&expanded) + &self.contract_bias;
        let hidden = relu(contracted_pre.clone());
        let logit = self.output_weights.dot(&hidden) + self.output_bias;
        Ok(DanForward { mean, expanded_pre, expanded, contracted_pre, hidden, logit })
    }

    /// Logit from an exported hidden vector.
    pub fn readout(&self, hidden: &[f64]) -> f64 {
        self.output_weights.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.output_bias
    }
}

impl Network for DanParams {
    fn input_dim(&self) -> usize {
        self.expand_weights.ncols()
    }

    fn output_dim(&self) -> usize {
        self.output_weights.len()
    }

    fn logit(&self, seq: ArrayView2<f64>) -> Result<f64> {
        Ok(self.forward(seq)?.logit)
    }

    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(seq)?.hidden)
    }

    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)> {
        let f = self.forward(seq)?;
        let d_hidden = &self.output_weights * dlogit;
        let d_contracted = d_hidden * f.contracted_pre.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let d_expanded = self.contract_weights.t().dot(&d_contracted);
        let d_expanded_pre = d_expanded * f.expanded_pre.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let grads = DanParams {
            expand_weights: outer(&d_expanded_pre, &f.mean),
            expand_bias: d_expanded_pre,
            contract_weights: outer(&d_contracted, &f.expanded),
            contract_bias: d_contracted,
            output_weights: &f.hidden * dlogit,
            output_bias: dlogit,
        };
        Ok((f.logit, grads))
    }

    fn zeros_like(&self) -> Self {
        DanParams {
            expand_weights: Array2::zeros(self.expand_weights.raw_dim()),
            expand_bias: Array1::zeros(self.expand_bias.len()),
            contract_weights: Array2::zeros(self.contract_weights.raw_dim()),
            contract_bias: Array1::zeros(self.contract_bias.len()),
            output_weights: Array1::zeros(self.output_weights.len()),
            output_bias: 0.0,
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.expand_weights.as_slice().expect("standard layout"),
            self.expand_bias.as_slice().expect("standard layout"),
            self.contract_weights.as_slice().expect("standard layout"),
            self.contract_bias.as_slice().expect("standard layout"),
            self.output_weights.as_slice().expect("standard layout"),
            std::slice::from_ref(&self.output_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.expand_weights.as_slice_mut().expect("standard layout"),
            self.expand_bias.as_slice_mut().expect("standard layout"),
            self.contract_weights.as_slice_mut().expect("standard layout"),
            self.contract_bias.as_slice_mut().expect("standard layout"),
            self.output_weights.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.output_bias),
        ]
    }
}
