//! Train every combiner on a label that depends on the interaction of two
//! embedding coordinates and compare final losses and traveler embeddings.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget::combiner::{train_combiner, CombinerKind, CombinerTrainConfig, SequenceExample};

fn main() -> retarget::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<SequenceExample> = (0..400)
        .map(|_| {
            let len = rng.random_range(2..6);
            let seq = Array2::from_shape_fn((len, 4), |_| rng.random_range(-2.0..2.0));
            let mean = seq.mean_axis(ndarray::Axis(0)).unwrap();
            SequenceExample::new(seq, if mean[0] * mean[1] > 0.0 { 1.0 } else { 0.0 })
        })
        .collect::<retarget::Result<_>>()?;
    let config = CombinerTrainConfig { epochs: 60, patience: 10, seed: 3, ..Default::default() };
    for kind in CombinerKind::ALL {
        let (params, report) = train_combiner(kind, &data, &config)?;
        let embedding = params.embed(data[0].sequence.view())?;
        println!(
            "{:<15} params {:>5}  epochs {:>3}  train loss {:.4}  embedding dim {}",
            kind.name(),
            params.num_params(),
            report.epochs_run(),
            report.train_loss.last().unwrap(),
            embedding.len()
        );
    }
    Ok(())
}
