//! Handcrafted traveler features.
//!
//! The vector layout is fixed (see [`FEATURE_NAMES`]). Windowed features look back
//! [`WINDOW_MS`] from the anchor, the traveler's latest non-booking event. Booking
//! events never move the anchor and are only counted when they belong to a session
//! before the current one, so a booking at the end of the current session cannot
//! leak into its own features.
//!
//! Counts are invariant under reordering within the window; the recency slots
//! (6 and 7) depend on order.

use std::collections::{BTreeSet, HashSet, VecDeque};

use super::event::{ActivityEvent, ActivityType};
use super::session::TravelerHistory;
use super::{MS_PER_DAY, MS_PER_HOUR};
use crate::{Error, Result};

pub const WINDOW_MS: i64 = 7 * MS_PER_DAY;

pub const FEATURE_NAMES: [&str; 13] = [
    "views_7d",
    "clicks_7d",
    "searches_7d",
    "distinct_listings_7d",
    "distinct_destinations_7d",
    "sessions_7d",
    "hours_since_last_view",
    "hours_since_last_search",
    "mean_session_length",
    "prior_booking_count",
    "prior_booking_value",
    "has_view",
    "has_search",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

pub fn handcrafted_features(history: &TravelerHistory) -> Vec<f64> {
    handcrafted_features_with(history, WINDOW_MS)
}

pub fn handcrafted_features_with(history: &TravelerHistory, window_ms: i64) -> Vec<f64> {
    let mut out = vec![0.0; NUM_FEATURES];
    let browsing = |e: &&ActivityEvent| e.activity_type != ActivityType::Booking;

    let n_sessions = history.sessions.len();
    for s in history.sessions.iter().take(n_sessions.saturating_sub(1)) {
        for e in s.events.iter().filter(|e| e.activity_type == ActivityType::Booking) {
            out[9] += 1.0;
            out[10] += e.booking_value.unwrap_or(0.0);
        }
    }

    let Some(anchor) = history.events().filter(browsing).map(|e| e.timestamp).max() else {
        return out;
    };
    let in_window = |ts: i64| ts > anchor - window_ms;

    let mut listings = HashSet::new();
    let mut destinations = HashSet::new();
    let mut last_view = None;
    let mut last_search = None;
    let mut active_sessions = 0usize;
    let mut browsing_events = 0usize;
    for s in &history.sessions {
        let mut session_in_window = false;
        let mut session_active = false;
        for e in s.events.iter().filter(browsing) {
            session_active = true;
            browsing_events += 1;
            match e.activity_type {
                ActivityType::View => last_view = Some(e.timestamp),
                ActivityType::Search => last_search = Some(e.timestamp),
                _ => {}
            }
            if !in_window(e.timestamp) {
                continue;
            }
            session_in_window = true;
            match e.activity_type {
                ActivityType::View => out[0] += 1.0,
                ActivityType::Click => out[1] += 1.0,
                ActivityType::Search => out[2] += 1.0,
                ActivityType::Booking => unreachable!(),
            }
            if e.activity_type.is_listing_interaction() {
                if let Some(l) = &e.listing_id {
                    listings.insert(l.as_str());
                }
            }
            if let Some(d) = &e.destination_id {
                destinations.insert(d.as_str());
            }
        }
        if session_in_window {
            out[5] += 1.0;
        }
        if session_active {
            active_sessions += 1;
        }
    }
    out[3] = listings.len() as f64;
    out[4] = destinations.len() as f64;
    if let Some(t) = last_view {
        out[6] = (anchor - t) as f64 / MS_PER_HOUR as f64;
        out[11] = 1.0;
    }
    if let Some(t) = last_search {
        out[7] = (anchor - t) as f64 / MS_PER_HOUR as f64;
        out[12] = 1.0;
    }
    if active_sessions > 0 {
        out[8] = browsing_events as f64 / active_sessions as f64;
    }
    out
}

#[derive(Debug, Clone)]
struct WindowEntry {
    ts: i64,
    kind: ActivityType,
    listing: Option<String>,
    destination: Option<String>,
    session: u64,
}

/// Incremental version of [`handcrafted_features`] for stream scoring. Feeding a
/// traveler's events one by one yields the same vector as sessionizing them with
/// the same gap and calling the batch function.
#[derive(Debug, Clone)]
pub struct FeatureState {
    gap_ms: i64,
    window_ms: i64,
    last_ts: Option<i64>,
    session: u64,
    session_active: bool,
    window: VecDeque<WindowEntry>,
    anchor: Option<i64>,
    last_view: Option<i64>,
    last_search: Option<i64>,
    active_sessions: u64,
    browsing_events: u64,
    prior_bookings: u64,
    prior_value: f64,
    current_bookings: u64,
    current_value: f64,
}

impl FeatureState {
    pub fn new(gap_ms: i64, window_ms: i64) -> Self {
        FeatureState {
            gap_ms,
            window_ms,
            last_ts: None,
            session: 0,
            session_active: false,
            window: VecDeque::new(),
            anchor: None,
            last_view: None,
            last_search: None,
            active_sessions: 0,
            browsing_events: 0,
            prior_bookings: 0,
            prior_value: 0.0,
            current_bookings: 0,
            current_value: 0.0,
        }
    }

    pub fn push(&mut self, event: &ActivityEvent) -> Result<()> {
        if let Some(last) = self.last_ts {
            if event.timestamp < last {
                return Err(Error::NonMonotonicTimestamps {
                    traveler_id: event.traveler_id.clone(),
                    previous: last,
                    next: event.timestamp,
                });
            }
            if event.timestamp - last >= self.gap_ms {
                self.session += 1;
                self.session_active = false;
                self.prior_bookings += self.current_bookings;
                self.prior_value += self.current_value;
                self.current_bookings = 0;
                self.current_value = 0.0;
            }
        }
        self.last_ts = Some(event.timestamp);

        if event.activity_type == ActivityType::Booking {
            self.current_bookings += 1;
            self.current_value += event.booking_value.unwrap_or(0.0);
            return Ok(());
        }

        self.browsing_events += 1;
        if !self.session_active {
            self.session_active = true;
            self.active_sessions += 1;
        }
        match event.activity_type {
            ActivityType::View => self.last_view = Some(event.timestamp),
            ActivityType::Search => self.last_search = Some(event.timestamp),
            _ => {}
        }
        self.anchor = Some(event.timestamp);
        self.window.push_back(WindowEntry {
            ts: event.timestamp,
            kind: event.activity_type,
            listing: event.listing_id.clone(),
            destination: event.destination_id.clone(),
            session: self.session,
        });
        let horizon = event.timestamp - self.window_ms;
        while self.window.front().is_some_and(|w| w.ts <= horizon) {
            self.window.pop_front();
        }
        Ok(())
    }

    pub fn features(&self) -> Vec<f64> {
        let mut out = vec![0.0; NUM_FEATURES];
        out[9] = self.prior_bookings as f64;
        out[10] = self.prior_value;
        let Some(anchor) = self.anchor else {
            return out;
        };
        let mut listings = BTreeSet::new();
        let mut destinations = BTreeSet::new();
        let mut sessions = BTreeSet::new();
        for w in &self.window {
            match w.kind {
                ActivityType::View => out[0] += 1.0,
                ActivityType::Click => out[1] += 1.0,
                ActivityType::Search => out[2] += 1.0,
                ActivityType::Booking => {}
            }
            if w.kind.is_listing_interaction() {
                if let Some(l) = &w.listing {
                    listings.insert(l.as_str());
                }
            }
            if let Some(d) = &w.destination {
                destinations.insert(d.as_str());
            }
            sessions.insert(w.session);
        }
        out[3] = listings.len() as f64;
        out[4] = destinations.len() as f64;
        out[5] = sessions.len() as f64;
        if let Some(t) = self.last_view {
            out[6] = (anchor - t) as f64 / MS_PER_HOUR as f64;
            out[11] = 1.0;
        }
        if let Some(t) = self.last_search {
            out[7] = (anchor - t) as f64 / MS_PER_HOUR as f64;
            out[12] = 1.0;
        }
        if self.active_sessions > 0 {
            out[8] = self.browsing_events as f64 / self.active_sessions as f64;
        }
        out
    }
}
