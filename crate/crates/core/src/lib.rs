//! Booking-intent and booking-value prediction for re-targeting returning travelers.
//!
//! The crate is organized as a chain of stages, each usable on its own:
//!
//! - [`model`]: activity events, sessionization, traveler histories and handcrafted features.
//! - [`embedding`]: skip-gram listing embeddings with negative sampling, destination
//!   embeddings and cold-start inference.
//! - [`combiner`]: traveler embeddings composed from listing embeddings (random pick,
//!   average, deep average network, LSTM, LSTM with attention).
//! - [`gbdt`]: second-order gradient boosted trees for intent and value.
//! - [`buckets`]: bid utility and quantile funnel buckets.
//! - [`eval`]: AUC, precision/recall/F1 and the temporal split.
//! - [`pipeline`]: synthetic worlds, the offline pipeline and stream scoring.
//!
//! Runnable walkthroughs for each stage live in `examples/`.

pub mod buckets;
pub mod combiner;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod model;
pub mod pipeline;
pub(crate) mod util;

pub use error::{Error, Result};
