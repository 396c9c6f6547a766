use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::skipgram::EmbeddingTable;
use crate::model::{ActivityEvent, ActivityType};
use crate::{Error, Result};

/// Share of each listing's demand driven by each destination. Rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    listings: Vec<String>,
    destinations: Vec<String>,
    proportions: Vec<Vec<f64>>,
}

impl DemandMatrix {
    pub fn new(listings: Vec<String>, destinations: Vec<String>, proportions: Vec<Vec<f64>>) -> Result<Self> {
        if proportions.len() != listings.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} demand rows for {} listings",
                proportions.len(),
                listings.len()
            )));
        }
        for (row, id) in proportions.iter().zip(&listings) {
            if row.len() != destinations.len() {
                return Err(Error::ShapeMismatch(format!("demand row for `{id}` has {} columns", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidInput(format!("negative demand share for `{id}`")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("demand shares for `{id}` sum to {total}")));
            }
        }
        Ok(DemandMatrix { listings, destinations, proportions })
    }

    /// Normalizes non-negative `(listing, destination) -> weight` counts per listing.
    /// Listings whose weights are all zero are left out.
    pub fn from_counts(counts: &BTreeMap<(String, String), f64>) -> Result<Self> {
        let destinations: Vec<String> =
            counts.keys().map(|(_, d)| d.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let col: BTreeMap<&str, usize> = destinations.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let mut rows: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for ((l, d), &w) in counts {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!("bad demand weight {w} for ({l}, {d})")));
            }
            rows.entry(l.as_str()).or_insert_with(|| vec![0.0; destinations.len()])[col[d.as_str()]] += w;
        }
        let mut listings = Vec::new();
        let mut proportions = Vec::new();
        for (l, row) in rows {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                listings.push(l.to_string());
                proportions.push(row.into_iter().map(|w| w / total).collect());
            }
        }
        DemandMatrix::new(listings, destinations, proportions)
    }

    pub fn listings(&self) -> &[String] {
        &self.listings
    }

    pub fn destinations(&self) -> &[String] {
        &self.destinations
    }

    pub fn row(&self, listing_idx: usize) -> &[f64] {
        &self.proportions[listing_idx]
    }
}

/// Demand shares from the log: booking counts per (listing, destination), or
/// view and click counts for listings that were never booked.
pub fn demand_from_events(events: &[ActivityEvent]) -> Result<DemandMatrix> {
    let mut bookings: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut views: BTreeMap<(String, String), f64> = BTreeMap::new();
    for e in events {
        let (Some(l), Some(d)) = (&e.listing_id, &e.destination_id) else {
            continue;
        };
        let key = (l.clone(), d.clone());
        match e.activity_type {
            ActivityType::Booking => *bookings.entry(key).or_default() += 1.0,
            ActivityType::View | ActivityType::Click => *views.entry(key).or_default() += 1.0,
            ActivityType::Search => {}
        }
    }
    let booked: BTreeSet<String> = bookings.keys().map(|(l, _)| l.clone()).collect();
    for (key, w) in views {
        if !booked.contains(&key.0) {
            bookings.insert(key, w);
        }
    }
    DemandMatrix::from_counts(&bookings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DestinationEmbeddings {
    vectors: EmbeddingTable,
    demand: DemandMatrix,
}

impl DestinationEmbeddings {
    pub fn vectors(&self) -> &EmbeddingTable {
        &self.vectors
    }

    pub fn demand(&self) -> &DemandMatrix {
        &self.demand
    }

    pub fn get(&self, destination: &str) -> Result<&[f64]> {
        self.vectors.get(destination).ok_or_else(|| Error::UnknownDestination(destination.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }
}

/// Demand-weighted mean of listing vectors per destination:
/// `v_d = Σ_l p_ld v_l / Σ_l p_ld`, over listings that have a vector.
/// Destinations with no mass are left out.
pub fn destination_embeddings(listings: &EmbeddingTable, demand: &DemandMatrix) -> Result<DestinationEmbeddings> {
    let dim = listings.dim();
    let n_dest = demand.destinations.len();
    let mut sums = vec![vec![0.0; dim]; n_dest];
    let mut mass = vec![0.0; n_dest];
    for (i, l) in demand.listings.iter().enumerate() {
        let Some(v) = listings.get(l) else { continue };
        for (d, &p) in demand.row(i).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            mass[d] += p;
            for (s, x) in sums[d].iter_mut().zip(v) {
                *s += p * x;
            }
        }
    }
    let mut vectors = EmbeddingTable::new(dim);
    for (d, id) in demand.destinations.iter().enumerate() {
        if mass[d] > 0.0 {
            vectors.insert(id.clone(), sums[d].iter().map(|s| s / mass[d]).collect())?;
        }
    }
    Ok(DestinationEmbeddings { vectors, demand: demand.clone() })
}

/// Maps distance to destination share: `p_d ∝ exp(-distance_km / temperature_km)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoKernel {
    pub temperature_km: f64,
}

impl Default for GeoKernel {
    fn default() -> Self {
        GeoKernel { temperature_km: 50.0 }
    }
}

pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Estimated demand shares of a cold listing at `(lat, lon)` over destinations
/// that have both an embedding and a centroid, in destination id order.
pub fn cold_start_weights(
    destinations: &DestinationEmbeddings,
    centroids: &BTreeMap<String, (f64, f64)>,
    lat: f64,
    lon: f64,
    kernel: GeoKernel,
) -> Result<Vec<(String, f64)>> {
    let logits: Vec<(String, f64)> = centroids
        .iter()
        .filter(|(id, _)| destinations.vectors.contains(id))
        .map(|(id, &(clat, clon))| (id.clone(), -haversine_km(lat, lon, clat, clon) / kernel.temperature_km))
        .collect();
    if logits.is_empty() {
        return Err(Error::NoDestinations);
    }
    let max = logits.iter().map(|(_, z)| *z).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|(_, z)| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(logits.into_iter().zip(exps).map(|((id, _), e)| (id, e / total)).collect())
}

/// Expected embedding of a listing without interaction data: the demand-share
/// weighted sum of destination embeddings.
pub fn cold_start_embedding(
    destinations: &DestinationEmbeddings,
    centroids: &BTreeMap<String, (f64, f64)>,
    lat: f64,
    lon: f64,
    kernel: GeoKernel,
) -> Result<Vec<f64>> {
    let weights = cold_start_weights(destinations, centroids, lat, lon, kernel)?;
    let mut out = vec![0.0; destinations.dim()];
    for (id, w) in weights {
        for (o, x) in out.iter_mut().zip(destinations.get(&id)?) {
            *o += w * x;
        }
    }
    Ok(out)
}
