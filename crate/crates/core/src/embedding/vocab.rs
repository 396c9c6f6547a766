use std::collections::HashMap;

use crate::{Error, Result};

/// Listing ids mapped to dense indices, most frequent first.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total occurrences of retained listings.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Maps a sequence to indices, dropping listings outside the vocabulary.
    pub fn encode<S: AsRef<str>>(&self, seq: &[S]) -> Vec<usize> {
        seq.iter().filter_map(|s| self.index_of(s.as_ref())).collect()
    }
}

/// Counts listings over all sequences, drops those seen fewer than `min_count`
/// times and orders the rest by descending count, ties by id.
pub fn build_vocab<S: AsRef<str>>(sequences: &[Vec<S>], min_count: u64) -> Result<Vocabulary> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for seq in sequences {
        for l in seq {
            *freq.entry(l.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ids: Vec<String> = kept.iter().map(|(id, _)| id.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
    let total = counts.iter().sum();
    Ok(Vocabulary { ids, index, counts, total })
}

/// Probability of keeping one occurrence of a listing with relative frequency
/// `freq / total` during pair generation: `min(1, sqrt(t / f))`.
pub fn keep_probability(freq: u64, total: u64, threshold: f64) -> f64 {
    let f = freq as f64 / total as f64;
    (threshold / f).sqrt().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus() -> Vec<Vec<&'static str>> {
        vec![vec!["A", "A", "B", "A"], vec!["A", "A"]]
    }

    #[test]
    fn prunes_rare_listings() {
        let v = build_vocab(&corpus(), 2).unwrap();
        assert_eq!(v.ids(), ["A"]);
        assert_eq!(v.count(0), 5);
        assert_eq!(v.total(), 5);
        let all = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(all.ids(), ["A", "B"]);
        assert!(matches!(build_vocab(&corpus(), 6), Err(Error::EmptyVocabulary { min_count: 6 })));
        let empty: Vec<Vec<String>> = vec![];
        assert!(build_vocab(&empty, 1).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let v = build_vocab(&[vec!["z", "b", "m"]], 1).unwrap();
        assert_eq!(v.ids(), ["b", "m", "z"]);
        assert_eq!(v.encode(&["m", "q", "z"]), vec![1, 2]);
    }

    #[test]
    fn keep_probability_boundaries() {
        let t = 1e-4;
        assert_eq!(keep_probability(1, 10_000, t), 1.0);
        assert!((keep_probability(4, 10_000, t) - 0.5).abs() < 1e-12);
        assert_eq!(keep_probability(1, 1_000_000, t), 1.0);
    }

    #[test]
    fn keep_rate_matches_closed_form() {
        let p = keep_probability(9, 10_000, 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let kept = (0..draws).filter(|_| rng.random::<f64>() < p).count();
        assert!((kept as f64 / draws as f64 - p).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn frequencies_match_recount(seqs in prop::collection::vec(prop::collection::vec(0u8..12, 0..15), 1..10)) {
            let seqs: Vec<Vec<String>> = seqs.iter().map(|s| s.iter().map(|x| format!("l{x}")).collect()).collect();
            prop_assume!(seqs.iter().any(|s| !s.is_empty()));
            let v = build_vocab(&seqs, 1).unwrap();
            let mut naive: HashMap<String, u64> = HashMap::new();
            for s in &seqs { for l in s { *naive.entry(l.clone()).or_default() += 1; } }
            prop_assert_eq!(v.len(), naive.len());
            for (id, c) in naive {
                prop_assert_eq!(v.count(v.index_of(&id).unwrap()), c);
            }
            for w in v.counts().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
