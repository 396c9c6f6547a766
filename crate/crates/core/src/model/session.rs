use std::collections::HashMap;

use super::event::{ActivityEvent, ActivityType};
use crate::{Error, Result};

/// Thirty minutes of inactivity closes a session.
pub const DEFAULT_GAP_MS: i64 = 30 * 60 * 1000;

/// A run of one traveler's events with no inactivity gap of `gap_ms` or more.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub traveler_id: String,
    pub events: Vec<ActivityEvent>,
    /// Listing ids of view and click events, in order.
    pub listing_sequence: Vec<String>,
    pub label_booked: bool,
    pub label_value: f64,
}

impl Session {
    pub fn from_events(traveler_id: impl Into<String>, events: Vec<ActivityEvent>) -> Self {
        let listing_sequence = events
            .iter()
            .filter(|e| e.activity_type.is_listing_interaction())
            .filter_map(|e| e.listing_id.clone())
            .collect();
        let bookings = events.iter().filter(|e| e.activity_type == ActivityType::Booking);
        let mut label_booked = false;
        let mut label_value = 0.0;
        for b in bookings {
            label_booked = true;
            label_value += b.booking_value.unwrap_or(0.0);
        }
        Session { traveler_id: traveler_id.into(), events, listing_sequence, label_booked, label_value }
    }

    pub fn start(&self) -> i64 {
        self.events.first().map_or(0, |e| e.timestamp)
    }

    pub fn end(&self) -> i64 {
        self.events.last().map_or(0, |e| e.timestamp)
    }
}

/// All sessions of one traveler in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelerHistory {
    pub traveler_id: String,
    pub sessions: Vec<Session>,
    /// Listing interactions of every session before the current (last) one.
    pub context_listings: Vec<String>,
}

impl TravelerHistory {
    pub fn new(traveler_id: impl Into<String>, mut sessions: Vec<Session>) -> Self {
        sessions.sort_by_key(Session::start);
        let context_listings = match sessions.split_last() {
            Some((_, prior)) => prior.iter().flat_map(|s| s.listing_sequence.iter().cloned()).collect(),
            None => Vec::new(),
        };
        TravelerHistory { traveler_id: traveler_id.into(), sessions, context_listings }
    }

    pub fn current_session(&self) -> Option<&Session> {
        self.sessions.last()
    }

    pub fn events(&self) -> impl Iterator<Item = &ActivityEvent> {
        self.sessions.iter().flat_map(|s| s.events.iter())
    }

    /// Every listing interaction across the history, oldest first.
    pub fn listing_sequence(&self) -> Vec<String> {
        self.sessions.iter().flat_map(|s| s.listing_sequence.iter().cloned()).collect()
    }

    /// Booking outcome of the current session.
    pub fn label(&self) -> (bool, f64) {
        self.current_session().map_or((false, 0.0), |s| (s.label_booked, s.label_value))
    }
}

/// Splits each traveler's events into sessions wherever consecutive events are
/// `gap_ms` or more apart. Travelers come out in order of first appearance.
pub fn sessionize(events: &[ActivityEvent], gap_ms: i64) -> Result<Vec<Session>> {
    if gap_ms <= 0 {
        return Err(Error::InvalidInput(format!("session gap must be positive, got {gap_ms}")));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&ActivityEvent>> = HashMap::new();
    for e in events {
        let entry = grouped.entry(e.traveler_id.as_str()).or_insert_with(|| {
            order.push(e.traveler_id.as_str());
            Vec::new()
        });
        if let Some(prev) = entry.last() {
            if e.timestamp < prev.timestamp {
                return Err(Error::NonMonotonicTimestamps {
                    traveler_id: e.traveler_id.clone(),
                    previous: prev.timestamp,
                    next: e.timestamp,
                });
            }
        }
        entry.push(e);
    }

    let mut sessions = Vec::new();
    for traveler in order {
        let evs = &grouped[traveler];
        let mut current: Vec<ActivityEvent> = Vec::new();
        for e in evs {
            if let Some(last) = current.last() {
                if e.timestamp - last.timestamp >= gap_ms {
                    sessions.push(Session::from_events(traveler, std::mem::take(&mut current)));
                }
            }
            current.push((*e).clone());
        }
        if !current.is_empty() {
            sessions.push(Session::from_events(traveler, current));
        }
    }
    Ok(sessions)
}

/// Sessionizes `events` and groups the sessions per traveler.
pub fn build_histories(events: &[ActivityEvent], gap_ms: i64) -> Result<Vec<TravelerHistory>> {
    let sessions = sessionize(events, gap_ms)?;
    let mut histories: Vec<TravelerHistory> = Vec::new();
    let mut pending: Vec<Session> = Vec::new();
    for s in sessions {
        if pending.last().is_some_and(|p| p.traveler_id != s.traveler_id) {
            let id = pending[0].traveler_id.clone();
            histories.push(TravelerHistory::new(id, std::mem::take(&mut pending)));
        }
        pending.push(s);
    }
    if !pending.is_empty() {
        let id = pending[0].traveler_id.clone();
        histories.push(TravelerHistory::new(id, pending));
    }
    Ok(histories)
}
