//! End-to-end orchestration: synthetic worlds with a known booking model, the
//! offline pipeline with versioned artifacts, and stream scoring.

mod config;
mod run;
mod stream;
mod synth;

pub use config::PipelineConfig;
pub use run::{
    combiner_file, combiner_label, combiner_probability, join_features, run_on_events, run_pipeline, sha256_hex,
    traveler_embedding, CombinerTraining, FeatureSet, Manifest, ModelBundle, PipelineOutcome, PipelineReport,
    ScoringSpec, BUCKETS_FILE, CONFIG_FILE, EMBEDDINGS_FILE, INTENT_FILE, MANIFEST_FILE, REPORT_JSON, REPORT_TEXT,
    SCORING_FILE, THRESHOLDS_FILE, VALUE_FILE,
};
pub use stream::{StreamScorer, StreamStats};
pub use synth::{
    generate_world, read_truth, write_world, BookingRule, Centroid, DestinationTruth, GroundTruth, ListingTruth,
    RuleParams, SyntheticWorldConfig, TravelerTruth, World, CENTROIDS_FILE, EVENTS_FILE, TRUTH_FILE,
};
