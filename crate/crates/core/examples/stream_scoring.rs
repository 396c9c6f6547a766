//! Train a bundle, then replay the evaluation period as a live stream with a
//! small traveler cache.

use retarget::pipeline::{generate_world, run_on_events, PipelineConfig, StreamScorer, SyntheticWorldConfig};

fn main() -> retarget::Result<()> {
    let world = generate_world(&SyntheticWorldConfig { n_travelers: 1000, seed: 2, ..Default::default() })?;
    let outcome = run_on_events(&world.events, &PipelineConfig { seed: 2, ..Default::default() })?;
    let mut scorer = StreamScorer::new(outcome.bundle, 200)?;

    let mut input = Vec::new();
    for e in &world.events {
        input.extend(serde_json::to_vec(e).unwrap());
        input.push(b'\n');
    }
    let (mut records, mut diagnostics) = (Vec::new(), Vec::new());
    let stats = scorer.run(input.as_slice(), &mut records, &mut diagnostics)?;
    println!("{stats:?}");
    for line in String::from_utf8_lossy(&records).lines().rev().take(3) {
        println!("{line}");
    }
    Ok(())
}
