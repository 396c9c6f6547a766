//! Pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::buckets::{BucketKey, DEFAULT_BUCKETS};
use crate::combiner::{CombinerKind, CombinerTrainConfig, MAX_SEQUENCE_LEN};
use crate::embedding::SkipGramConfig;
use crate::eval::DEFAULT_THRESHOLD;
use crate::gbdt::{BoostConfig, Objective};
use crate::model::{BotFilter, DEFAULT_GAP_MS, WINDOW_MS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// NDJSON event log.
    pub events: PathBuf,
    /// Directory for models, reports and the manifest.
    pub output: PathBuf,
    /// Root seed; every stage seed is derived from it.
    pub seed: u64,
    /// Worker threads; 1 gives bit-reproducible runs, 0 uses every core.
    pub threads: usize,
    pub session_gap_ms: i64,
    pub feature_window_ms: i64,
    /// First timestamp of the evaluation period. Defaults to the earliest
    /// event plus `period_days`.
    pub boundary_ms: Option<i64>,
    pub period_days: i64,
    /// Share of evaluation-period travelers held out for testing.
    pub test_fraction: f64,
    /// Combiners to train and compare.
    pub combiners: Vec<CombinerKind>,
    /// Combiner whose embeddings feed the production models.
    pub primary_combiner: CombinerKind,
    pub max_sequence_len: usize,
    /// Standardize each embedding coordinate before it reaches the combiners.
    pub standardize_embeddings: bool,
    pub threshold: f64,
    pub n_buckets: usize,
    pub bucket_key: BucketKey,
    pub bots: BotFilter,
    pub skipgram: SkipGramConfig,
    pub combiner: CombinerTrainConfig,
    pub intent: BoostConfig,
    pub value: BoostConfig,
    /// Traveler cap for stream scoring.
    pub stream_capacity: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            events: PathBuf::from("events.ndjson"),
            output: PathBuf::from("out"),
            seed: 0,
            threads: 1,
            session_gap_ms: DEFAULT_GAP_MS,
            feature_window_ms: WINDOW_MS,
            boundary_ms: None,
            period_days: 7,
            test_fraction: 0.3,
            combiners: vec![CombinerKind::Random, CombinerKind::Average, CombinerKind::Dan],
            primary_combiner: CombinerKind::Dan,
            max_sequence_len: MAX_SEQUENCE_LEN,
            standardize_embeddings: true,
            threshold: DEFAULT_THRESHOLD,
            n_buckets: DEFAULT_BUCKETS,
            bucket_key: BucketKey::Utility,
            bots: BotFilter::default(),
            skipgram: SkipGramConfig { subsample_threshold: 1e-3, ..SkipGramConfig::default() },
            combiner: CombinerTrainConfig::default(),
            intent: BoostConfig::default(),
            value: BoostConfig { objective: Objective::SquaredLogValue, ..BoostConfig::default() },
            stream_capacity: 100_000,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with stage seeds and thread counts derived from `seed` and `threads`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.skipgram.seed = self.seed;
        c.skipgram.threads = self.threads.max(1);
        c.combiner.seed = self.seed.wrapping_add(1);
        c.intent.seed = self.seed.wrapping_add(2);
        c.value.seed = self.seed.wrapping_add(3);
        c.intent.objective = Objective::Logistic;
        c.value.objective = Objective::SquaredLogValue;
        let parallel = self.threads != 1;
        c.intent.parallel = parallel;
        c.value.parallel = parallel;
        if !c.combiners.contains(&c.primary_combiner) {
            c.combiners.push(c.primary_combiner);
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.session_gap_ms <= 0 || self.feature_window_ms <= 0 || self.period_days <= 0 {
            return bad("session gap, feature window and period length must be positive");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if self.max_sequence_len == 0 || self.stream_capacity == 0 {
            return bad("max_sequence_len and stream_capacity must be positive");
        }
        if self.n_buckets < 2 {
            return bad("n_buckets must be at least 2");
        }
        if self.combiners.is_empty() {
            return bad("at least one combiner is required");
        }
        self.skipgram.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.combiner.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.intent.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.value.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
