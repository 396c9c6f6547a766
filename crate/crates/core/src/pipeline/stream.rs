//! Per-event scoring of an NDJSON activity stream.
//!
//! Each traveler keeps incremental handcrafted counters and the most recent
//! embedded listings. After every event the traveler is rescored and one
//! record is written. State lives in an LRU cache; an evicted traveler who
//! returns starts from an empty state and is rebuilt from later events only.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::num::NonZeroUsize;

use lru::LruCache;
use serde::Serialize;

use super::run::ModelBundle;
use crate::buckets::BucketRecord;
use crate::model::{ActivityEvent, FeatureState};
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct TravelerState {
    features: FeatureState,
    recent: VecDeque<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StreamStats {
    pub lines: usize,
    pub scored: usize,
    pub errors: usize,
    pub evictions: usize,
}

pub struct StreamScorer {
    bundle: ModelBundle,
    states: LruCache<String, TravelerState>,
    stats: StreamStats,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    line: usize,
    error: &'a str,
}

impl StreamScorer {
    pub fn new(bundle: ModelBundle, capacity: usize) -> Result<Self> {
        let cap = NonZeroUsize::new(capacity)
            .ok_or_else(|| Error::InvalidInput("stream capacity must be positive".into()))?;
        Ok(StreamScorer { bundle, states: LruCache::new(cap), stats: StreamStats::default() })
    }

    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    pub fn tracked_travelers(&self) -> usize {
        self.states.len()
    }

    /// Folds `event` into its traveler's state and rescores the traveler. An
    /// event that fails validation leaves every state untouched.
    pub fn process(&mut self, event: &ActivityEvent) -> Result<BucketRecord> {
        event.validate()?;
        let spec = &self.bundle.spec;
        if !self.states.contains(&event.traveler_id) {
            let fresh = TravelerState {
                features: FeatureState::new(spec.session_gap_ms, spec.feature_window_ms),
                recent: VecDeque::new(),
            };
            if let Some((evicted, _)) = self.states.push(event.traveler_id.clone(), fresh) {
                if evicted != event.traveler_id {
                    self.stats.evictions += 1;
                }
            }
        }
        let state = self.states.get_mut(&event.traveler_id).expect("just inserted");
        state.features.push(event)?;
        if event.activity_type.is_listing_interaction() {
            if let Some(l) = &event.listing_id {
                if self.bundle.embeddings.contains(l) {
                    state.recent.push_back(l.clone());
                    if state.recent.len() > spec.max_sequence_len {
                        state.recent.pop_front();
                    }
                }
            }
        }
        let listings: Vec<&str> = state.recent.iter().map(String::as_str).collect();
        let features = state.features.features();
        let record = self.bundle.score(&event.traveler_id, &features, &listings)?;
        self.stats.scored += 1;
        Ok(record)
    }

    /// Scores every line of `input`, writing one record per event to `out` and
    /// one JSON diagnostic per bad line to `diagnostics`.
    pub fn run<R: BufRead, W: Write, D: Write>(
        &mut self,
        input: R,
        mut out: W,
        mut diagnostics: D,
    ) -> Result<StreamStats> {
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            self.stats.lines += 1;
            let result =
                serde_json::from_str::<ActivityEvent>(line.trim()).map_err(Error::from).and_then(|e| self.process(&e));
            match result {
                Ok(record) => {
                    serde_json::to_writer(&mut out, &record)?;
                    out.write_all(b"\n")?;
                    out.flush()?;
                }
                Err(e) => {
                    self.stats.errors += 1;
                    let msg = e.to_string();
                    serde_json::to_writer(&mut diagnostics, &Diagnostic { line: i + 1, error: &msg })?;
                    diagnostics.write_all(b"\n")?;
                }
            }
        }
        diagnostics.flush()?;
        Ok(self.stats)
    }
}
