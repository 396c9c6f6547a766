//! Turn intent and value predictions into utilities, fit quantile buckets and
//! summarize what each bucket earned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget::buckets::{bucket_report, fit_thresholds, BucketKey, BucketRecord, Outcome, UtilityScore};

fn main() -> retarget::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scores: Vec<UtilityScore> = (0..1000)
        .map(|i| UtilityScore::new(format!("t{i}"), rng.random_range(0.0..1.0), rng.random_range(50.0..300.0)))
        .collect::<retarget::Result<_>>()?;
    let utilities: Vec<f64> = scores.iter().map(|s| s.u).collect();
    let thresholds = fit_thresholds(&utilities, 5)?;
    println!("cuts {:?}", thresholds.cuts().iter().map(|c| format!("{c:.1}")).collect::<Vec<_>>());

    let records: Vec<BucketRecord> =
        scores.iter().map(|s| BucketRecord::new(s, &thresholds, BucketKey::Utility)).collect();
    println!("first record {}", serde_json::to_string(&records[0]).unwrap());

    let outcomes: Vec<Outcome> = scores
        .iter()
        .map(|s| {
            let booked = rng.random_bool(s.r);
            Outcome { booked, value: if booked { s.m } else { 0.0 } }
        })
        .collect();
    let assignments: Vec<usize> = records.iter().map(|r| r.bucket).collect();
    let report = bucket_report(thresholds.n_buckets(), &assignments, &utilities, &outcomes)?;
    for b in &report.buckets {
        println!("bucket {} n={:>3} revenue per traveler {:>7.2}", b.bucket, b.count, b.mean_rpc.unwrap_or(0.0));
    }
    println!("spearman(bucket, revenue) = {:?}", report.spearman);
    Ok(())
}
