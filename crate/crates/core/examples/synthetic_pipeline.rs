//! Generate a synthetic marketplace, run the offline pipeline into a temporary
//! directory and print the comparison table and manifest.

use retarget::pipeline::{
    generate_world, run_pipeline, write_world, PipelineConfig, SyntheticWorldConfig, EVENTS_FILE,
};

fn main() -> retarget::Result<()> {
    let dir = std::env::temp_dir().join("retarget-example-pipeline");
    let world = generate_world(&SyntheticWorldConfig { n_travelers: 2000, seed: 9, ..Default::default() })?;
    write_world(&dir, &world)?;
    println!("{} events, booking rate {:.3}", world.events.len(), world.truth.booking_rate());

    let config =
        PipelineConfig { events: dir.join(EVENTS_FILE), output: dir.join("models"), seed: 9, ..Default::default() };
    let (outcome, manifest) = run_pipeline(&config)?;
    print!("{}", outcome.report.to_text());
    for (name, hash) in &manifest.artifacts {
        println!("{name:<28} {}", &hash[..16]);
    }
    Ok(())
}
