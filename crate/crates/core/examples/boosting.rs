//! Fit a logistic and a squared-error boosted ensemble and round-trip one through text.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget::eval::auc;
use retarget::gbdt::{fit_targets, read_ensemble, write_ensemble, BoostConfig, Objective};

fn main() -> retarget::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<Vec<f64>> = (0..2000).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let intent: Vec<f64> = x.iter().map(|r| f64::from(u8::from((r[0] > 0.0) != (r[1] > 0.0)))).collect();
    let value: Vec<f64> = x.iter().map(|r| 100.0 + 40.0 * r[2]).collect();

    let (train, test) = (1500, 2000);
    let classifier = fit_targets(&x[..train], &intent[..train], &BoostConfig { rounds: 50, ..Default::default() })?;
    let scores = classifier.predict_batch(&x[train..test])?;
    let labels: Vec<bool> = intent[train..test].iter().map(|&y| y == 1.0).collect();
    println!("xor intent: test AUC {:.3} with {} trees", auc(&scores, &labels)?, classifier.trees.len());

    let regression = BoostConfig { rounds: 100, objective: Objective::SquaredLogValue, ..Default::default() };
    let log_value: Vec<f64> = value.iter().map(|v| v.ln_1p()).collect();
    let regressor = fit_targets(&x[..train], &log_value[..train], &regression)?;
    let mse = (train..test).map(|i| (regressor.predict(&x[i]).unwrap() - value[i]).powi(2)).sum::<f64>()
        / (test - train) as f64;
    println!("value regression: test MSE {mse:.3}");

    let mut buf = Vec::new();
    write_ensemble(&mut buf, &regressor)?;
    let restored = read_ensemble(buf.as_slice())?;
    println!("round trip identical: {}", restored == regressor);
    Ok(())
}
