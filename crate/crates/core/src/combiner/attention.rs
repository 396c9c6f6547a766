//! Attention over LSTM hidden states: `s_t = w·tanh(h_t)`, `α = softmax(s)`,
//! context `Σ α_t h_t`, then a linear readout of the context.

use ndarray::{Array1, ArrayView2};
use rand::Rng;

use super::lstm::{LstmParams, Readout};
use super::{xavier_vector, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub score_weights: Array1<f64>,
}

impl AttentionParams {
    pub fn zeros(hidden: usize) -> Self {
        AttentionParams { score_weights: Array1::zeros(hidden) }
    }

    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        AttentionParams { score_weights: xavier_vector(hidden, rng) }
    }
}

/// Context vector and attention weights over `hidden` states.
pub fn attention_forward(params: &AttentionParams, hidden: &[Array1<f64>]) -> Result<(Array1<f64>, Vec<f64>)> {
    if hidden.is_empty() {
        return Err(Error::EmptySequence);
    }
    let h = params.score_weights.len();
    if hidden.iter().any(|v| v.len() != h) {
        return Err(Error::ShapeMismatch(format!("attention expects hidden size {h}")));
    }
    let scores: Vec<f64> = hidden.iter().map(|v| params.score_weights.dot(&v.mapv(f64::tanh))).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let alphas: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let mut context = Array1::zeros(h);
    for (a, v) in alphas.iter().zip(hidden) {
        context.scaled_add(*a, v);
    }
    Ok((context, alphas))
}

/// Gradients of the score weights and of each hidden state given the gradient
/// flowing into the context vector.
fn attention_backward(
    params: &AttentionParams,
    hidden: &[Array1<f64>],
    alphas: &[f64],
    d_context: &Array1<f64>,
) -> (Array1<f64>, Vec<Array1<f64>>) {
    let d_alpha: Vec<f64> = hidden.iter().map(|v| d_context.dot(v)).collect();
    let weighted: f64 = alphas.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
    let mut d_weights = Array1::zeros(params.score_weights.len());
    let mut d_hidden = Vec::with_capacity(hidden.len());
    for ((v, &a), &da) in hidden.iter().zip(alphas).zip(&d_alpha) {
        let ds = a * (da - weighted);
        let tanh_v = v.mapv(f64::tanh);
        d_weights.scaled_add(ds, &tanh_v);
        let through_score = &params.score_weights * &tanh_v.mapv(|t| 1.0 - t * t) * ds;
        d_hidden.push(d_context * a + through_score);
    }
    (d_weights, d_hidden)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel {
    pub lstm: LstmParams,
    pub attention: AttentionParams,
    pub readout: Readout,
}

impl AttentionModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        AttentionModel {
            lstm: LstmParams::zeros(input_dim, hidden),
            attention: AttentionParams::zeros(hidden),
            readout: Readout::zeros(hidden),
        }
    }

    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        AttentionModel {
            lstm: LstmParams::init(input_dim, hidden, rng),
            attention: AttentionParams::init(hidden, rng),
            readout: Readout::init(hidden, rng),
        }
    }
}

impl Network for AttentionModel {
    fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.lstm.hidden_size()
    }

    fn logit(&self, seq: ArrayView2<f64>) -> Result<f64> {
        let context = self.embedding(seq)?;
        Ok(self.readout.logit(context.view()))
    }

    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        let trace = self.lstm.forward(seq)?;
        Ok(attention_forward(&self.attention, &trace.hidden)?.0)
    }

    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)> {
        let trace = self.lstm.forward(seq)?;
        let (context, alphas) = attention_forward(&self.attention, &trace.hidden)?;
        let logit = self.readout.logit(context.view());
        let d_context = &self.readout.weights * dlogit;
        let (d_scores, d_hidden) = attention_backward(&self.attention, &trace.hidden, &alphas, &d_context);
        let grads = AttentionModel {
            lstm: self.lstm.backward(&trace, &d_hidden),
            attention: AttentionParams { score_weights: d_scores },
            readout: Readout { weights: context * dlogit, bias: dlogit },
        };
        Ok((logit, grads))
    }

    fn zeros_like(&self) -> Self {
        AttentionModel {
            lstm: LstmParams::zeros(self.lstm.input_dim(), self.lstm.hidden_size()),
            attention: AttentionParams::zeros(self.attention.score_weights.len()),
            readout: Readout::zeros(self.readout.weights.len()),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.push(self.attention.score_weights.as_slice().expect("standard layout"));
        t.push(self.readout.weights.as_slice().expect("standard layout"));
        t.push(std::slice::from_ref(&self.readout.bias));
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.push(self.attention.score_weights.as_slice_mut().expect("standard layout"));
        t.push(self.readout.weights.as_slice_mut().expect("standard layout"));
        t.push(std::slice::from_mut(&mut self.readout.bias));
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_state_gets_all_weight() {
        let p = AttentionParams { score_weights: array![0.3, -2.0] };
        let (ctx, a) = attention_forward(&p, &[array![0.5, 0.25]]).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(ctx, array![0.5, 0.25]);
    }

    #[test]
    fn identical_states_are_uniform() {
        let p = AttentionParams { score_weights: array![1.0, 4.0] };
        let states = vec![array![0.2, -0.7]; 4];
        let (_, a) = attention_forward(&p, &states).unwrap();
        for w in a {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn context_matches_explicit_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AttentionParams { score_weights: Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0)) };
        let states: Vec<Array1<f64>> =
            (0..5).map(|_| Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0))).collect();
        let (ctx, alphas) = attention_forward(&p, &states).unwrap();
        let raw: Vec<f64> =
            states.iter().map(|h| (0..3).map(|j| p.score_weights[j] * h[j].tanh()).sum::<f64>().exp()).collect();
        let z: f64 = raw.iter().sum();
        let mut expected = [0.0; 3];
        for (r, h) in raw.iter().zip(&states) {
            for j in 0..3 {
                expected[j] += r / z * h[j];
            }
        }
        for j in 0..3 {
            assert!((ctx[j] - expected[j]).abs() < 1e-12);
        }
        assert!((alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(alphas.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn empty_states_rejected() {
        let p = AttentionParams::zeros(2);
        assert!(attention_forward(&p, &[]).is_err());
    }
}
