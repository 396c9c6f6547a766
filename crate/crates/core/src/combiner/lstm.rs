//! LSTM cell with forget, input and output gates over `[h_{t-1}, x_t]`,
//! and a linear readout of the final hidden state.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{check_sequence, outer, xavier_matrix, xavier_vector, Network};
use crate::util::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub forget_weights: Array2<f64>,
    pub forget_bias: Array1<f64>,
    pub input_weights: Array2<f64>,
    pub input_bias: Array1<f64>,
    pub output_weights: Array2<f64>,
    pub output_bias: Array1<f64>,
    pub cell_weights: Array2<f64>,
    pub cell_bias: Array1<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// `h_1..h_T`
    pub hidden: Vec<Array1<f64>>,
    pub cells: Vec<Array1<f64>>,
    joined: Vec<Array1<f64>>,
    forget: Vec<Array1<f64>>,
    input: Vec<Array1<f64>>,
    output: Vec<Array1<f64>>,
    candidate: Vec<Array1<f64>>,
}

impl LstmTrace {
    pub fn last_hidden(&self) -> &Array1<f64> {
        self.hidden.last().expect("non-empty sequence")
    }
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let m = || Array2::zeros((hidden, hidden + input_dim));
        let v = || Array1::zeros(hidden);
        LstmParams {
            forget_weights: m(),
            forget_bias: v(),
            input_weights: m(),
            input_bias: v(),
            output_weights: m(),
            output_bias: v(),
            cell_weights: m(),
            cell_bias: v(),
        }
    }

    /// Xavier-uniform gate weights, zero biases except a forget bias of one.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let cols = hidden + input_dim;
        LstmParams {
            forget_weights: xavier_matrix(hidden, cols, rng),
            forget_bias: Array1::ones(hidden),
            input_weights: xavier_matrix(hidden, cols, rng),
            output_weights: xavier_matrix(hidden, cols, rng),
            cell_weights: xavier_matrix(hidden, cols, rng),
            ..LstmParams::zeros(input_dim, hidden)
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forget_bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.forget_weights.ncols().saturating_sub(self.hidden_size())
    }

    fn check_shapes(&self) -> Result<()> {
        let h = self.hidden_size();
        let shape = self.forget_weights.dim();
        let ok = h > 0
            && shape.0 == h
            && shape.1 > h
            && [&self.input_weights, &self.output_weights, &self.cell_weights].iter().all(|w| w.dim() == shape)
            && [&self.input_bias, &self.output_bias, &self.cell_bias].iter().all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("LSTM gate shapes disagree".into()))
        }
    }

    pub fn forward(&self, seq: ArrayView2<f64>) -> Result<LstmTrace> {
        self.check_shapes()?;
        check_sequence(seq, self.input_dim())?;
        let h = self.hidden_size();
        let mut prev_h = Array1::zeros(h);
        let mut prev_c = Array1::zeros(h);
        let t_len = seq.nrows();
        let mut trace = LstmTrace {
            hidden: Vec::with_capacity(t_len),
            cells: Vec::with_capacity(t_len),
            joined: Vec::with_capacity(t_len),
            forget: Vec::with_capacity(t_len),
            input: Vec::with_capacity(t_len),
            output: Vec::with_capacity(t_len),
            candidate: Vec::with_capacity(t_len),
        };
        for x in seq.rows() {
            let joined = concatenate![Axis(0), prev_h.view(), x];
            let f = (self.forget_weights.dot(&joined) + &self.forget_bias).mapv(sigmoid);
            let i = (self.input_weights.dot(&joined) + &self.input_bias).mapv(sigmoid);
            let o = (self.output_weights.dot(&joined) + &self.output_bias).mapv(sigmoid);
            let g = (self.cell_weights.dot(&joined) + &self.cell_bias).mapv(f64::tanh);
            let c = &f * &prev_c + &i * &g;
            let hid = &o * &c.mapv(f64::tanh);
            trace.joined.push(joined);
            trace.forget.push(f);
            trace.input.push(i);
            trace.output.push(o);
            trace.candidate.push(g);
            trace.cells.push(c.clone());
            trace.hidden.push(hid.clone());
            prev_h = hid;
            prev_c = c;
        }
        Ok(trace)
    }

    /// Backpropagation through time. `d_hidden[t]` is the loss gradient flowing
    /// into `h_t` from outside the recurrence.
    pub fn backward(&self, trace: &LstmTrace, d_hidden: &[Array1<f64>]) -> LstmParams {
        let h = self.hidden_size();
        let mut grads = LstmParams::zeros(self.input_dim(), h);
        let mut dh_next = Array1::zeros(h);
        let mut dc_next = Array1::zeros(h);
        for t in (0..trace.hidden.len()).rev() {
            let dh = &d_hidden[t] + &dh_next;
            let tanh_c = trace.cells[t].mapv(f64::tanh);
            let (f, i, o, g) = (&trace.forget[t], &trace.input[t], &trace.output[t], &trace.candidate[t]);
            let d_o = &dh * &tanh_c;
            let dc = &dc_next + &(&dh * o * &tanh_c.mapv(|v| 1.0 - v * v));
            let prev_c = if t > 0 { trace.cells[t - 1].clone() } else { Array1::zeros(h) };
            let dz_f = &dc * &prev_c * &f.mapv(|v| v * (1.0 - v));
            let dz_i = &dc * g * &i.mapv(|v| v * (1.0 - v));
            let dz_o = d_o * &o.mapv(|v| v * (1.0 - v));
            let dz_g = &dc * i * &g.mapv(|v| 1.0 - v * v);
            dc_next = &dc * f;

            let u = &trace.joined[t];
            grads.forget_weights += &outer(&dz_f, u);
            grads.input_weights += &outer(&dz_i, u);
            grads.output_weights += &outer(&dz_o, u);
            grads.cell_weights += &outer(&dz_g, u);
            let du = self.forget_weights.t().dot(&dz_f)
                + self.input_weights.t().dot(&dz_i)
                + self.output_weights.t().dot(&dz_o)
                + self.cell_weights.t().dot(&dz_g);
            grads.forget_bias += &dz_f;
            grads.input_bias += &dz_i;
            grads.output_bias += &dz_o;
            grads.cell_bias += &dz_g;
            dh_next = du.slice(s![..h]).to_owned();
        }
        grads
    }

    pub(super) fn tensors(&self) -> Vec<&[f64]> {
        [
            (&self.forget_weights, &self.forget_bias),
            (&self.input_weights, &self.input_bias),
            (&self.output_weights, &self.output_bias),
            (&self.cell_weights, &self.cell_bias),
        ]
        .into_iter()
        .flat_map(|(w, b)| [w.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")])
        .collect()
    }

    pub(super) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.forget_weights.as_slice_mut().expect("standard layout"),
            self.forget_bias.as_slice_mut().expect("standard layout"),
            self.input_weights.as_slice_mut().expect("standard layout"),
            self.input_bias.as_slice_mut().expect("standard layout"),
            self.output_weights.as_slice_mut().expect("standard layout"),
            self.output_bias.as_slice_mut().expect("standard layout"),
            self.cell_weights.as_slice_mut().expect("standard layout"),
            self.cell_bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Hidden states `h_1..h_T` of the cell over `seq`.
pub fn lstm_forward(params: &LstmParams, seq: ArrayView2<f64>) -> Result<Vec<Array1<f64>>> {
    Ok(params.forward(seq)?.hidden)
}

/// Linear logit over a representation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub weights: Array1<f64>,
    pub bias: f64,
}

impl Readout {
    pub fn zeros(n: usize) -> Self {
        Readout { weights: Array1::zeros(n), bias: 0.0 }
    }

    pub fn init<R: Rng>(n: usize, rng: &mut R) -> Self {
        Readout { weights: xavier_vector(n, rng), bias: 0.0 }
    }

    pub fn logit(&self, v: ArrayView1<f64>) -> f64 {
        self.weights.dot(&v) + self.bias
    }
}

/// LSTM whose final hidden state is both the traveler embedding and the
/// input of the readout.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub lstm: LstmParams,
    pub readout: Readout,
}

impl LstmModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmModel { lstm: LstmParams::zeros(input_dim, hidden), readout: Readout::zeros(hidden) }
    }

    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        LstmModel { lstm: LstmParams::init(input_dim, hidden, rng), readout: Readout::init(hidden, rng) }
    }
}

impl Network for LstmModel {
    fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.lstm.hidden_size()
    }

    fn logit(&self, seq: ArrayView2<f64>) -> Result<f64> {
        let trace = self.lstm.forward(seq)?;
        Ok(self.readout.logit(trace.last_hidden().view()))
    }

    fn embedding(&self, seq: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.lstm.forward(seq)?.last_hidden().clone())
    }

    fn backprop(&self, seq: ArrayView2<f64>, dlogit: f64) -> Result<(f64, Self)> {
        let trace = self.lstm.forward(seq)?;
        let last = trace.last_hidden();
        let logit = self.readout.logit(last.view());
        let h = self.lstm.hidden_size();
        let mut d_hidden = vec![Array1::zeros(h); trace.hidden.len()];
        *d_hidden.last_mut().expect("non-empty") = &self.readout.weights * dlogit;
        let grads = LstmModel {
            lstm: self.lstm.backward(&trace, &d_hidden),
            readout: Readout { weights: last * dlogit, bias: dlogit },
        };
        Ok((logit, grads))
    }

    fn zeros_like(&self) -> Self {
        LstmModel {
            lstm: LstmParams::zeros(self.lstm.input_dim(), self.lstm.hidden_size()),
            readout: Readout::zeros(self.readout.weights.len()),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.push(self.readout.weights.as_slice().expect("standard layout"));
        t.push(std::slice::from_ref(&self.readout.bias));
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.push(self.readout.weights.as_slice_mut().expect("standard layout"));
        t.push(std::slice::from_mut(&mut self.readout.bias));
        t
    }
}
