//! Second-order gradient boosted regression trees with exact greedy splits.
//!
//! Each round fits a tree to the gradients and hessians of the loss at the
//! current margins. The learning rate is folded into the stored leaf weights,
//! so a margin is `base_score` plus the plain sum of tree outputs.

mod io;
mod objective;
mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{read_ensemble, write_ensemble};
pub use objective::{grad_hess, leaf_weight, split_gain, GradHess, Objective};
pub use tree::{find_best_split, Node, RegTree, SplitCandidate, MIN_SPLIT_GAIN};

use crate::model::LabeledExample;
use crate::{Error, Result};
use tree::{build_tree, presort, TreeParams};

const BASE_RATE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    /// `None` grows until no split has positive gain.
    pub max_depth: Option<usize>,
    pub lambda: f64,
    pub gamma: f64,
    /// Fraction of features offered to each tree.
    pub colsample: f64,
    pub min_child_hessian: f64,
    pub seed: u64,
    pub objective: Objective,
    /// Scan features on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(6),
            lambda: 1.0,
            gamma: 0.0,
            colsample: 0.8,
            min_child_hessian: 1e-3,
            seed: 0,
            objective: Objective::Logistic,
            parallel: true,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad(format!("colsample {} outside (0, 1]", self.colsample));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_hessian >= 0.0) {
            return bad("lambda, gamma and min_child_hessian must be non-negative".into());
        }
        if !(self.lambda.is_finite() && self.gamma.is_finite() && self.min_child_hessian.is_finite()) {
            return bad("lambda, gamma and min_child_hessian must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub base_score: f64,
    pub trees: Vec<RegTree>,
    pub objective: Objective,
    pub num_features: usize,
    pub config: BoostConfig,
}

impl Ensemble {
    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::ShapeMismatch(format!(
                "{} features given, model expects {}",
                x.len(),
                self.num_features
            )));
        }
        Ok(())
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    /// Probability for the logistic objective, value for the squared one.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.objective.transform(self.predict_margin(x)?))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Fits on labelled examples: intent labels for the logistic objective,
/// `log1p(value)` for the squared one.
pub fn fit(data: &[LabeledExample], config: &BoostConfig) -> Result<Ensemble> {
    let features: Vec<Vec<f64>> = data.iter().map(|e| e.features.clone()).collect();
    let targets = data
        .iter()
        .map(|e| match config.objective {
            Objective::Logistic => Ok(if e.label_intent { 1.0 } else { 0.0 }),
            Objective::SquaredLogValue => {
                if e.label_value >= 0.0 && e.label_value.is_finite() {
                    Ok(e.label_value.ln_1p())
                } else {
                    Err(Error::InvalidLabel(e.label_value))
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    fit_targets(&features, &targets, config)
}

/// Fits on raw targets (`{0, 1}` or already log-transformed values).
pub fn fit_targets(features: &[Vec<f64>], targets: &[f64], config: &BoostConfig) -> Result<Ensemble> {
    config.validate()?;
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if targets.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows but {} targets", targets.len())));
    }
    let width = features[0].len();
    let mut columns = vec![Vec::with_capacity(n); width];
    for row in features {
        if row.len() != width {
            return Err(Error::ShapeMismatch(format!("row of {} features, expected {width}", row.len())));
        }
        for (c, &v) in columns.iter_mut().zip(row) {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite feature value {v}")));
            }
            c.push(v);
        }
    }
    for &y in targets {
        config.objective.check_target(y)?;
    }

    let mean = targets.iter().sum::<f64>() / n as f64;
    let base_score = match config.objective {
        Objective::Logistic => {
            let p = mean.clamp(BASE_RATE_CLAMP, 1.0 - BASE_RATE_CLAMP);
            (p / (1.0 - p)).ln()
        }
        Objective::SquaredLogValue => mean,
    };
    let params = TreeParams {
        max_depth: config.max_depth,
        lambda: config.lambda,
        gamma: config.gamma,
        min_child_hessian: config.min_child_hessian,
        scale: config.learning_rate,
    };
    let presorted = presort(&columns);
    let n_selected = ((config.colsample * width as f64).round() as usize).clamp(1.min(width), width);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut all_features: Vec<usize> = (0..width).collect();
    let mut margins = vec![base_score; n];
    let mut trees = Vec::new();

    for round in 0..config.rounds {
        let offered: Vec<usize> = if n_selected == width {
            all_features.clone()
        } else {
            all_features.shuffle(&mut rng);
            let mut f = all_features[..n_selected].to_vec();
            f.sort_unstable();
            f
        };
        let gh = grad_hess(config.objective, targets, &margins)?;
        let tree = build_tree(&columns, &presorted, &offered, &gh.g, &gh.h, params, config.parallel);
        if tree.nodes().len() == 1 {
            // a lone leaf carries no split; with every feature offered, later rounds cannot differ
            if n_selected == width {
                log::debug!("boosting stopped after {round} rounds: no split with positive gain");
                break;
            }
            continue;
        }
        for (m, row) in margins.iter_mut().zip(features) {
            *m += tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(Ensemble { base_score, trees, objective: config.objective, num_features: width, config: config.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn exact(objective: Objective) -> BoostConfig {
        BoostConfig {
            learning_rate: 1.0,
            max_depth: None,
            lambda: 0.0,
            gamma: 0.0,
            colsample: 1.0,
            objective,
            ..Default::default()
        }
    }

    fn random_rows(n: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn constant_target_gives_base_only() {
        let rows = random_rows(30, 3, 1);
        let ex: Vec<LabeledExample> = rows
            .iter()
            .enumerate()
            .map(|(i, f)| LabeledExample {
                traveler_id: format!("t{i}"),
                features: f.clone(),
                label_intent: true,
                label_value: 240.0,
            })
            .collect();
        let model = fit(&ex, &exact(Objective::SquaredLogValue)).unwrap();
        assert!((model.base_score - 240f64.ln_1p()).abs() < 1e-12);
        assert!(model.trees.is_empty());
        for r in &rows {
            assert!((model.predict(r).unwrap() - 240.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_logistic_is_valid() {
        let rows = random_rows(20, 2, 2);
        let model = fit_targets(&rows, &[0.0; 20], &BoostConfig::default()).unwrap();
        assert!(model.trees.is_empty());
        let p = model.predict(&rows[0]).unwrap();
        assert!(p > 0.0 && p < 1e-6);
    }

    #[test]
    fn learns_unbalanced_xor() {
        let cells = [((0.0, 0.0), 0.0, 3), ((1.0, 1.0), 0.0, 1), ((0.0, 1.0), 1.0, 2), ((1.0, 0.0), 1.0, 2)];
        let (mut rows, mut y) = (Vec::new(), Vec::new());
        for ((a, b), label, count) in cells {
            for _ in 0..count {
                rows.push(vec![a, b]);
                y.push(label);
            }
        }
        let config = BoostConfig { max_depth: Some(2), rounds: 10, ..exact(Objective::Logistic) };
        let model = fit_targets(&rows, &y, &config).unwrap();
        assert_eq!(model.trees[0].depth(), 2);
        for (r, &label) in rows.iter().zip(&y) {
            assert_eq!(model.predict(r).unwrap() > 0.5, label == 1.0);
        }
    }

    fn twenty_examples() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: [f64; 20] =
            [0.3, 1.7, -0.4, 2.2, 0.9, -1.5, 1.1, 0.0, 2.8, -0.9, 1.4, 0.6, -2.1, 2.5, 0.2, 1.9, -0.2, 0.8, 3.1, -1.1];
        let y = [0., 1., 0., 1., 0., 0., 1., 0., 1., 0., 1., 1., 0., 1., 0., 0., 0., 1., 1., 0.];
        (x.iter().map(|&v| vec![v, (v * 7.0).sin()]).collect(), y.to_vec())
    }

    #[test]
    fn first_round_stump_matches_leaf_oracle() {
        let (rows, y) = twenty_examples();
        let config = BoostConfig { rounds: 1, max_depth: Some(1), lambda: 1.0, ..exact(Objective::Logistic) };
        let model = fit_targets(&rows, &y, &config).unwrap();
        let Node::Split { feature, threshold, left, right } = model.trees[0].nodes()[0] else { panic!() };

        // recomputed from raw derivatives at the base margin
        let p = y.iter().sum::<f64>() / 20.0;
        let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
        for (r, &t) in rows.iter().zip(&y) {
            let (g, h) = (p - t, p * (1.0 - p));
            if r[feature] <= threshold {
                gl += g;
                hl += h;
            } else {
                gr += g;
                hr += h;
            }
        }
        let weight = |i: usize| match model.trees[0].nodes()[i] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => panic!(),
        };
        assert!((weight(left) - (-gl / (hl + 1.0))).abs() < 1e-9);
        assert!((weight(right) - (-gr / (hr + 1.0))).abs() < 1e-9);

        let shrunk = fit_targets(&rows, &y, &BoostConfig { learning_rate: 0.1, ..config }).unwrap();
        let Node::Leaf { weight: w } = shrunk.trees[0].nodes()[left] else { panic!() };
        assert!((w - 0.1 * weight(left)).abs() < 1e-12);
    }

    #[test]
    fn squared_loss_interpolates_distinct_rows() {
        let rows = random_rows(60, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..5.0)).collect();
        let mse_after = |k: usize| {
            let m = fit_targets(&rows, &y, &BoostConfig { rounds: k, ..exact(Objective::SquaredLogValue) }).unwrap();
            rows.iter().zip(&y).map(|(r, t)| (m.predict_margin(r).unwrap() - t).powi(2)).sum::<f64>() / 60.0
        };
        let mut prev = f64::INFINITY;
        for k in 0..=3 {
            let mse = mse_after(k);
            assert!(mse <= prev + 1e-15);
            prev = mse;
        }
        assert!(mse_after(60) < 1e-6);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let rows = random_rows(200, 6, 5);
        let y: Vec<f64> = rows.iter().map(|r| if r[0] * r[1] + r[2] > 0.0 { 1.0 } else { 0.0 }).collect();
        for colsample in [1.0, 0.5] {
            let c = BoostConfig { rounds: 20, colsample, ..Default::default() };
            let a = fit_targets(&rows, &y, &c).unwrap();
            let b = fit_targets(&rows, &y, &BoostConfig { parallel: false, ..c.clone() }).unwrap();
            assert_eq!(a.trees, b.trees);
        }
    }

    fn walk(tree: &RegTree, i: usize, x: &[f64]) -> f64 {
        match tree.nodes()[i] {
            Node::Leaf { weight } => weight,
            Node::Split { feature, threshold, left, right } => {
                walk(tree, if x[feature] <= threshold { left } else { right }, x)
            }
        }
    }

    #[test]
    fn prediction_matches_naive_traversal() {
        let rows = random_rows(300, 4, 6);
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > r[3] { 1.0 } else { 0.0 }).collect();
        let model = fit_targets(&rows, &y, &BoostConfig { rounds: 15, ..Default::default() }).unwrap();
        for x in random_rows(100, 4, 7) {
            let mut margin = model.base_score;
            for t in &model.trees {
                margin += walk(t, 0, &x);
            }
            let p = 1.0 / (1.0 + (-margin).exp());
            let got = model.predict(&x).unwrap();
            assert!((got - p).abs() < 1e-12);
            assert!(got > 0.0 && got < 1.0);
        }
        assert!(model.predict(&[0.0; 3]).is_err());
    }

    #[test]
    fn stump_is_a_step_function() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 0.0 } else { 2.0 }).collect();
        let c = BoostConfig { rounds: 1, max_depth: Some(1), ..exact(Objective::SquaredLogValue) };
        let m = fit_targets(&rows, &y, &c).unwrap();
        let below: Vec<f64> = (0..4).map(|i| m.predict_margin(&rows[i]).unwrap()).collect();
        let above: Vec<f64> = (4..10).map(|i| m.predict_margin(&rows[i]).unwrap()).collect();
        assert!(below.iter().all(|&v| v == below[0]) && above.iter().all(|&v| v == above[0]));
        assert!(below[0] < above[0]);
        assert_eq!(m.predict(&[-100.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_targets(&[], &[], &BoostConfig::default()).is_err());
        assert!(fit_targets(&[vec![1.0], vec![1.0, 2.0]], &[0.0, 1.0], &BoostConfig::default()).is_err());
        assert!(fit_targets(&[vec![1.0]], &[0.5], &BoostConfig::default()).is_err());
        assert!(fit_targets(&[vec![1.0]], &[1.0], &BoostConfig { colsample: 0.0, ..Default::default() }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariant_under_monotone_feature_maps(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..40)
                .map(|_| vec![rng.random_range(-20i32..20) as f64 / 4.0, rng.random_range(-1.0..1.0)])
                .collect();
            let y: Vec<f64> = rows.iter().map(|r| if r[0] + r[1] > 0.5 { 1.0 } else { 0.0 }).collect();
            let warped: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0].powi(3) + 2.0 * r[0], r[1]]).collect();
            let c = BoostConfig { rounds: 5, max_depth: Some(3), ..Default::default() };
            let a = fit_targets(&rows, &y, &c).unwrap();
            let b = fit_targets(&warped, &y, &c).unwrap();
            prop_assert_eq!(a.trees.len(), b.trees.len());
            for (r, w) in rows.iter().zip(&warped) {
                prop_assert_eq!(a.predict(r).unwrap(), b.predict(w).unwrap());
            }
        }

        #[test]
        fn zero_weight_leaves_leave_predictions_alone(seed in 0u64..1000) {
            let rows = random_rows(30, 2, seed);
            let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
            let m = fit_targets(&rows, &y, &BoostConfig { rounds: 4, ..Default::default() }).unwrap();
            for r in &rows {
                let mut margin = m.base_score;
                for t in &m.trees {
                    let before = margin;
                    margin += t.predict(r);
                    if t.predict(r) == 0.0 {
                        prop_assert_eq!(margin, before);
                    }
                }
            }
        }
    }
}
