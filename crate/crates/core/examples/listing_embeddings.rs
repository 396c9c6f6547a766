//! Train skip-gram listing embeddings on two disjoint browsing cliques, then place a
//! listing with no interactions near the destination it sits beside.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget::embedding::{
    cold_start_embedding, destination_embeddings, train_skipgram, DemandMatrix, GeoKernel, SkipGramConfig,
};

fn main() -> retarget::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cliques = [["a0", "a1", "a2", "a3", "a4"], ["b0", "b1", "b2", "b3", "b4"]];
    let sequences: Vec<Vec<&str>> =
        (0..400).map(|i| (0..12).map(|_| cliques[i % 2][rng.random_range(0..5)]).collect()).collect();
    let config = SkipGramConfig { dim: 16, min_count: 1, subsample_threshold: 1e-3, seed: 7, ..Default::default() };
    let model = train_skipgram(&sequences, &config)?;
    let table = model.to_table().standardized();
    let vec = |id: &str| table.get(id).unwrap();
    println!("standardized cos(a0, a1) = {:.3}", cos(vec("a0"), vec("a1")));
    println!("standardized cos(a0, b1) = {:.3}", cos(vec("a0"), vec("b1")));

    let listings: Vec<String> = table.iter().map(|(id, _)| id.to_string()).collect();
    let shares = listings.iter().map(|l| if l.starts_with('a') { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
    let demand = DemandMatrix::new(listings, vec!["coast".into(), "mountains".into()], shares)?;
    let destinations = destination_embeddings(&table, &demand)?;
    let centroids = BTreeMap::from([("coast".to_string(), (38.7, -9.1)), ("mountains".to_string(), (40.3, -7.6))]);
    let cold = cold_start_embedding(&destinations, &centroids, 38.72, -9.14, GeoKernel::default())?;
    println!("cold listing vs coast     {:.3}", cos(&cold, destinations.get("coast")?));
    println!("cold listing vs mountains {:.3}", cos(&cold, destinations.get("mountains")?));
    Ok(())
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}
