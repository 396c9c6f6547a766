//! Per-example derivatives of the two losses and the closed-form leaf and gain.

use serde::{Deserialize, Serialize};

use crate::util::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Binary cross-entropy on a sigmoid margin.
    Logistic,
    /// Half squared error on `log1p(value)`.
    SquaredLogValue,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Logistic => "logistic",
            Objective::SquaredLogValue => "squared-log-value",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Objective::Logistic),
            "squared-log-value" => Ok(Objective::SquaredLogValue),
            _ => Err(Error::InvalidInput(format!("unknown objective `{s}`"))),
        }
    }

    /// Loss of one example at raw prediction `pred`.
    pub fn loss(self, y: f64, pred: f64) -> f64 {
        match self {
            Objective::Logistic => pred.max(0.0) - pred * y + (-pred.abs()).exp().ln_1p(),
            Objective::SquaredLogValue => 0.5 * (pred - y) * (pred - y),
        }
    }

    /// Maps a raw margin to the reported prediction.
    pub fn transform(self, margin: f64) -> f64 {
        match self {
            Objective::Logistic => sigmoid(margin),
            Objective::SquaredLogValue => margin.exp_m1().max(0.0),
        }
    }

    pub fn check_target(self, y: f64) -> Result<()> {
        let ok = match self {
            Objective::Logistic => y == 0.0 || y == 1.0,
            Objective::SquaredLogValue => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLabel(y))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn grad_hess(objective: Objective, y: &[f64], pred: &[f64]) -> Result<GradHess> {
    if y.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("{} targets but {} predictions", y.len(), pred.len())));
    }
    let mut g = Vec::with_capacity(y.len());
    let mut h = Vec::with_capacity(y.len());
    for (&y, &p) in y.iter().zip(pred) {
        objective.check_target(y)?;
        match objective {
            Objective::Logistic => {
                let s = sigmoid(p);
                g.push(s - y);
                h.push(s * (1.0 - s));
            }
            Objective::SquaredLogValue => {
                g.push(p - y);
                h.push(1.0);
            }
        }
    }
    Ok(GradHess { g, h })
}

pub fn leaf_weight(sum_g: f64, sum_h: f64, lambda: f64) -> Result<f64> {
    let denom = sum_h + lambda;
    if denom <= 0.0 || denom.is_nan() {
        return Err(Error::InvalidInput(format!("leaf denominator {denom} is not positive")));
    }
    Ok(-sum_g / denom)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Loss reduction of splitting a node with sums `parent` into `left` and the remainder.
pub fn split_gain(parent: (f64, f64), left: (f64, f64), lambda: f64, gamma: f64) -> f64 {
    let right = (parent.0 - left.0, parent.1 - left.1);
    0.5 * (score(left.0, left.1, lambda) + score(right.0, right.1, lambda) - score(parent.0, parent.1, lambda)) - gamma
}
