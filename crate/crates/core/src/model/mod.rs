//! Domain types shared across the crate: activity events, sessions, traveler
//! histories, listings and labeled examples.

mod event;
mod features;
mod ingest;
mod session;

pub use event::{ActivityEvent, ActivityType, LabeledExample, Listing};
pub use features::{
    handcrafted_features, handcrafted_features_with, FeatureState, FEATURE_NAMES, NUM_FEATURES, WINDOW_MS,
};
pub use ingest::{filter_bots, read_events, write_events, BotFilter, IngestReport};
pub use session::{build_histories, sessionize, Session, TravelerHistory, DEFAULT_GAP_MS};

pub const MS_PER_HOUR: i64 = 3_600_000;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;
