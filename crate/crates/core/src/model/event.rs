use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityType {
    View,
    Click,
    Search,
    Booking,
}

impl ActivityType {
    pub fn is_listing_interaction(self) -> bool {
        matches!(self, ActivityType::View | ActivityType::Click)
    }
}

/// One clickstream record. Serialized field names match the session-log format:
/// `traveler_id`, `ts`, `type`, `listing_id`, `destination_id`, `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub traveler_id: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(rename = "type")]
    pub activity_type: ActivityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listing_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination_id: Option<String>,
    #[serde(rename = "value", default, skip_serializing_if = "Option::is_none")]
    pub booking_value: Option<f64>,
}

impl ActivityEvent {
    fn new(
        traveler_id: impl Into<String>,
        timestamp: i64,
        activity_type: ActivityType,
        listing_id: Option<String>,
        destination_id: Option<String>,
        booking_value: Option<f64>,
    ) -> Self {
        ActivityEvent {
            traveler_id: traveler_id.into(),
            timestamp,
            activity_type,
            listing_id,
            destination_id,
            booking_value,
        }
    }

    pub fn view(traveler: impl Into<String>, ts: i64, listing: &str, destination: Option<&str>) -> Self {
        Self::new(traveler, ts, ActivityType::View, Some(listing.into()), destination.map(Into::into), None)
    }

    pub fn click(traveler: impl Into<String>, ts: i64, listing: &str, destination: Option<&str>) -> Self {
        Self::new(traveler, ts, ActivityType::Click, Some(listing.into()), destination.map(Into::into), None)
    }

    pub fn search(traveler: impl Into<String>, ts: i64, destination: Option<&str>) -> Self {
        Self::new(traveler, ts, ActivityType::Search, None, destination.map(Into::into), None)
    }

    pub fn booking(traveler: impl Into<String>, ts: i64, listing: &str, destination: Option<&str>, value: f64) -> Self {
        Self::new(traveler, ts, ActivityType::Booking, Some(listing.into()), destination.map(Into::into), Some(value))
    }

    /// Checks the per-record invariants: a value is present exactly on bookings,
    /// and views, clicks and bookings name a listing.
    pub fn validate(&self) -> Result<()> {
        if self.traveler_id.is_empty() {
            return Err(Error::InvalidInput("empty traveler_id".into()));
        }
        let is_booking = self.activity_type == ActivityType::Booking;
        match self.booking_value {
            Some(v) if !is_booking => return Err(Error::InvalidInput(format!("value {v} on a non-booking event"))),
            Some(v) if !(v.is_finite() && v >= 0.0) => {
                return Err(Error::InvalidInput(format!("booking value {v} must be finite and >= 0")))
            }
            None if is_booking => return Err(Error::InvalidInput("booking event without value".into())),
            _ => {}
        }
        if self.activity_type != ActivityType::Search && self.listing_id.is_none() {
            return Err(Error::InvalidInput(format!("{:?} event without listing_id", self.activity_type)));
        }
        Ok(())
    }
}

/// A listing with its location, used for cold-start inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub listing_id: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default)]
    pub view_count: u64,
}

impl Listing {
    pub fn new(listing_id: impl Into<String>, latitude: f64, longitude: f64, view_count: u64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidInput(format!("coordinates ({latitude}, {longitude}) out of range")));
        }
        Ok(Listing { listing_id: listing_id.into(), latitude, longitude, view_count })
    }
}

/// One row of a training set for the boosted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub traveler_id: String,
    pub features: Vec<f64>,
    pub label_intent: bool,
    pub label_value: f64,
}
