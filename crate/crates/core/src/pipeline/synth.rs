//! Synthetic clickstream worlds with a known booking model.
//!
//! Listings carry latent vectors clustered around their destination's center.
//! Each traveler has a latent taste near a home destination and browses by a
//! Markov chain that favors listings close to both the current listing and the
//! taste. The booking probability is a function of the mean latent vector of
//! the viewed listings and of engagement, so every label has a stored truth.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::model::{write_events, ActivityEvent, DEFAULT_GAP_MS, MS_PER_DAY};
use crate::util::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BookingRule {
    /// Logit linear in the mean latent vector.
    Linear,
    /// Logit driven by the product of two coordinates of the mean latent vector.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticWorldConfig {
    pub n_destinations: usize,
    pub listings_per_destination: usize,
    pub latent_dim: usize,
    pub n_travelers: usize,
    /// Sessions per traveler are `1 + Poisson(mean_sessions − 1)`, capped at 8.
    pub mean_sessions: f64,
    /// Listing views per session are `1 + Poisson(mean_session_length − 1)`, capped at 30.
    pub mean_session_length: f64,
    pub rule: BookingRule,
    /// Standard deviation of per-traveler noise added to the booking logit.
    pub noise: f64,
    pub signal_scale: f64,
    pub engagement_weight: f64,
    pub bias: f64,
    /// Standard deviation of listing latents around their destination center.
    pub listing_spread: f64,
    /// Standard deviation of traveler tastes around their home center.
    pub taste_spread: f64,
    pub cross_destination_prob: f64,
    pub click_prob: f64,
    pub search_prob: f64,
    pub periods: usize,
    pub period_days: i64,
    pub start_ms: i64,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            n_destinations: 8,
            listings_per_destination: 25,
            latent_dim: 4,
            n_travelers: 1000,
            mean_sessions: 2.0,
            mean_session_length: 5.0,
            rule: BookingRule::Linear,
            noise: 0.3,
            signal_scale: 3.0,
            engagement_weight: 1.0,
            bias: -1.0,
            listing_spread: 0.6,
            taste_spread: 0.8,
            cross_destination_prob: 0.05,
            click_prob: 0.3,
            search_prob: 0.5,
            periods: 2,
            period_days: 7,
            start_ms: 1_700_000_000_000,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_destinations", self.n_destinations),
            ("listings_per_destination", self.listings_per_destination),
            ("latent_dim", self.latent_dim),
            ("n_travelers", self.n_travelers),
            ("periods", self.periods),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.rule == BookingRule::Nonlinear && self.latent_dim < 2 {
            return Err(Error::InvalidInput("the nonlinear rule needs latent_dim >= 2".into()));
        }
        if self.listings_per_destination < 2 {
            return Err(Error::InvalidInput("need at least two listings per destination".into()));
        }
        if !(self.mean_sessions >= 1.0 && self.mean_session_length >= 1.0) {
            return Err(Error::InvalidInput("session means must be at least 1".into()));
        }
        let probs = [self.cross_destination_prob, self.click_prob, self.search_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("probabilities must lie in [0, 1]".into()));
        }
        let reals = [self.noise, self.listing_spread, self.taste_spread];
        if reals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.listing_spread == 0.0 {
            return Err(Error::InvalidInput("spreads and noise must be non-negative".into()));
        }
        if self.period_days <= 1 {
            return Err(Error::InvalidInput("period_days must exceed 1".into()));
        }
        Ok(())
    }

    pub fn period_ms(&self) -> i64 {
        self.period_days * MS_PER_DAY
    }

    /// Start of `period` (0-based).
    pub fn period_start(&self, period: usize) -> i64 {
        self.start_ms + period as i64 * self.period_ms()
    }

    fn reference_views(&self) -> f64 {
        self.mean_sessions * self.mean_session_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationTruth {
    pub destination_id: String,
    pub center: Vec<f64>,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingTruth {
    pub listing_id: String,
    pub destination_id: String,
    pub latent: Vec<f64>,
    pub latitude: f64,
    pub longitude: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelerTruth {
    pub traveler_id: String,
    pub period: usize,
    pub home_destination: String,
    pub mean_latent: Vec<f64>,
    pub views: usize,
    pub true_probability: f64,
    pub booked: bool,
    pub value: f64,
}

/// The booking model: `σ(bias + signal + engagement + noise)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleParams {
    pub rule: BookingRule,
    pub bias: f64,
    pub signal_scale: f64,
    /// Direction of the linear rule.
    pub weights: Vec<f64>,
    pub engagement_weight: f64,
    pub reference_views: f64,
}

impl RuleParams {
    /// Noise-free logit for a traveler who viewed `views` listings with mean latent `mean`.
    pub fn logit(&self, mean: &[f64], views: usize) -> f64 {
        let signal = match self.rule {
            BookingRule::Linear => mean.iter().zip(&self.weights).map(|(m, w)| m * w).sum::<f64>(),
            BookingRule::Nonlinear => mean[0] * mean[1],
        };
        let engagement = (views as f64).ln() - self.reference_views.ln();
        self.bias + self.signal_scale * signal + self.engagement_weight * engagement
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SyntheticWorldConfig,
    pub rule: RuleParams,
    pub destinations: Vec<DestinationTruth>,
    pub listings: Vec<ListingTruth>,
    pub travelers: Vec<TravelerTruth>,
}

impl GroundTruth {
    pub fn booking_rate(&self) -> f64 {
        self.travelers.iter().filter(|t| t.booked).count() as f64 / self.travelers.len() as f64
    }

    pub fn mean_true_probability(&self) -> f64 {
        self.travelers.iter().map(|t| t.true_probability).sum::<f64>() / self.travelers.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// Sorted by timestamp, then traveler id.
    pub events: Vec<ActivityEvent>,
    pub truth: GroundTruth,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn poisson_plus_one<R: Rng>(rng: &mut R, mean: f64, cap: usize) -> usize {
    if mean <= 1.0 {
        return 1;
    }
    let draw: f64 = Poisson::new(mean - 1.0).expect("positive rate").sample(rng);
    (1 + draw as usize).min(cap)
}

/// Generates a world; the same config always yields the same world.
pub fn generate_world(config: &SyntheticWorldConfig) -> Result<World> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dim = config.latent_dim;
    let gauss = |rng: &mut ChaCha8Rng, sd: f64| -> Vec<f64> { (0..dim).map(|_| sd * normal.sample(rng)).collect() };

    let mut weights = gauss(&mut rng, 1.0);
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
    weights.iter_mut().for_each(|w| *w /= norm);
    let rule = RuleParams {
        rule: config.rule,
        bias: config.bias,
        signal_scale: config.signal_scale,
        weights,
        engagement_weight: config.engagement_weight,
        reference_views: config.reference_views(),
    };

    let mut destinations = Vec::with_capacity(config.n_destinations);
    let mut listings = Vec::new();
    for d in 0..config.n_destinations {
        let center = gauss(&mut rng, 1.0);
        let (lat, lon) = (rng.random_range(-50.0..60.0), rng.random_range(-170.0..170.0));
        let id = format!("d{d:03}");
        for l in 0..config.listings_per_destination {
            let noise = gauss(&mut rng, config.listing_spread);
            let latent: Vec<f64> = center.iter().zip(&noise).map(|(c, n)| c + n).collect();
            let price = 80.0 * (0.3 * latent[dim - 1] + 0.2 * normal.sample(&mut rng)).exp();
            listings.push(ListingTruth {
                listing_id: format!("l{d:03}_{l:03}"),
                destination_id: id.clone(),
                latitude: lat + rng.random_range(-0.05..0.05),
                longitude: lon + rng.random_range(-0.05..0.05),
                price: (price * 100.0).round() / 100.0,
                latent,
            });
        }
        destinations.push(DestinationTruth { destination_id: id, center, latitude: lat, longitude: lon });
    }

    let per = config.listings_per_destination;
    let bw2 = 2.0 * config.listing_spread * config.listing_spread;
    let mut events = Vec::new();
    let mut travelers = Vec::with_capacity(config.n_travelers);
    for t in 0..config.n_travelers {
        let traveler_id = format!("t{t:06}");
        let period = rng.random_range(0..config.periods);
        let home = rng.random_range(0..config.n_destinations);
        let taste: Vec<f64> =
            destinations[home].center.iter().zip(gauss(&mut rng, config.taste_spread)).map(|(c, n)| c + n).collect();

        let n_sessions = poisson_plus_one(&mut rng, config.mean_sessions, 8);
        let window = config.period_ms() - MS_PER_DAY;
        let mut starts: Vec<i64> = (0..n_sessions).map(|_| rng.random_range(0..window)).collect();
        starts.sort_unstable();

        let mut clock = i64::MIN;
        let mut viewed: Vec<usize> = Vec::new();
        let mut mine = Vec::new();
        for start in starts {
            let mut ts = (config.period_start(period) + start).max(clock.saturating_add(DEFAULT_GAP_MS + 60_000));
            let dest = if rng.random_bool(config.cross_destination_prob) && config.n_destinations > 1 {
                (home + rng.random_range(1..config.n_destinations)) % config.n_destinations
            } else {
                home
            };
            let dest_id = destinations[dest].destination_id.clone();
            if rng.random_bool(config.search_prob) {
                mine.push(ActivityEvent::search(traveler_id.clone(), ts, Some(&dest_id)));
                ts += rng.random_range(10_000..120_000);
            }
            let length = poisson_plus_one(&mut rng, config.mean_session_length, 30);
            let mut current: Option<usize> = None;
            for step in 0..length {
                let w: Vec<f64> = (0..per)
                    .map(|j| {
                        let idx = dest * per + j;
                        if current == Some(idx) {
                            return 0.0;
                        }
                        let z = &listings[idx].latent;
                        let mut e = sq_dist(z, &taste);
                        if let Some(c) = current {
                            e += sq_dist(z, &listings[c].latent);
                        }
                        (-e / bw2).exp() + 1e-12
                    })
                    .collect();
                let idx = dest * per + pick_weighted(&mut rng, &w);
                if step > 0 {
                    ts += rng.random_range(10_000..300_000);
                }
                let l = &listings[idx];
                mine.push(ActivityEvent::view(traveler_id.clone(), ts, &l.listing_id, Some(&dest_id)));
                viewed.push(idx);
                if rng.random_bool(config.click_prob) {
                    ts += rng.random_range(5_000..60_000);
                    mine.push(ActivityEvent::click(traveler_id.clone(), ts, &l.listing_id, Some(&dest_id)));
                }
                current = Some(idx);
            }
            clock = ts;
        }

        let mut mean_latent = vec![0.0; dim];
        for &i in &viewed {
            for (m, z) in mean_latent.iter_mut().zip(&listings[i].latent) {
                *m += z / viewed.len() as f64;
            }
        }
        let logit = rule.logit(&mean_latent, viewed.len()) + config.noise * normal.sample(&mut rng);
        let true_probability = sigmoid(logit);
        let booked = rng.random_bool(true_probability);
        let mut value = 0.0;
        if booked {
            let last = &listings[*viewed.last().expect("at least one view")];
            let nights = poisson_plus_one(&mut rng, 3.0, 21) as f64;
            value = ((last.price * nights) * 100.0).round() / 100.0;
            let ts = clock + rng.random_range(60_000..600_000);
            mine.push(ActivityEvent::booking(
                traveler_id.clone(),
                ts,
                &last.listing_id,
                Some(&last.destination_id),
                value,
            ));
        }
        events.extend(mine);
        travelers.push(TravelerTruth {
            traveler_id,
            period,
            home_destination: destinations[home].destination_id.clone(),
            mean_latent,
            views: viewed.len(),
            true_probability,
            booked,
            value,
        });
    }
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.traveler_id.cmp(&b.traveler_id)));
    Ok(World { events, truth: GroundTruth { config: config.clone(), rule, destinations, listings, travelers } })
}

pub const EVENTS_FILE: &str = "events.ndjson";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const CENTROIDS_FILE: &str = "centroids.ndjson";

/// A destination location, one NDJSON line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub destination_id: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// Writes the event log, the ground truth and the destination centroids into `dir`.
pub fn write_world(dir: &Path, world: &World) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut events = BufWriter::new(fs::File::create(dir.join(EVENTS_FILE))?);
    write_events(&mut events, &world.events)?;
    events.flush()?;
    let mut truth = BufWriter::new(fs::File::create(dir.join(TRUTH_FILE))?);
    serde_json::to_writer(&mut truth, &world.truth)?;
    writeln!(truth)?;
    truth.flush()?;
    let mut centroids = BufWriter::new(fs::File::create(dir.join(CENTROIDS_FILE))?);
    for d in &world.truth.destinations {
        let c = Centroid { destination_id: d.destination_id.clone(), latitude: d.latitude, longitude: d.longitude };
        serde_json::to_writer(&mut centroids, &c)?;
        writeln!(centroids)?;
    }
    centroids.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    Ok(serde_json::from_reader(std::io::BufReader::new(fs::File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_histories, ActivityType};
    use std::collections::BTreeMap;

    fn small(rule: BookingRule, seed: u64) -> SyntheticWorldConfig {
        SyntheticWorldConfig { n_travelers: 300, rule, seed, ..Default::default() }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_world(&small(BookingRule::Nonlinear, 3)).unwrap();
        let b = generate_world(&small(BookingRule::Nonlinear, 3)).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_events(&mut x, &a.events).unwrap();
        write_events(&mut y, &b.events).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.truth, b.truth);
        let c = generate_world(&small(BookingRule::Nonlinear, 4)).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn events_are_valid_and_labels_match_truth() {
        let world = generate_world(&small(BookingRule::Linear, 1)).unwrap();
        for e in &world.events {
            e.validate().unwrap();
        }
        assert!(world.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let histories = build_histories(&world.events, DEFAULT_GAP_MS).unwrap();
        let truth: BTreeMap<&str, &TravelerTruth> =
            world.truth.travelers.iter().map(|t| (t.traveler_id.as_str(), t)).collect();
        assert_eq!(histories.len(), world.truth.travelers.len());
        for h in &histories {
            let t = truth[h.traveler_id.as_str()];
            let (booked, value) = h.label();
            assert_eq!(booked, t.booked);
            assert!((value - t.value).abs() < 1e-9);
            let views = h.events().filter(|e| e.activity_type == ActivityType::View).count();
            assert_eq!(views, t.views);
            let start = world.truth.config.period_start(t.period);
            assert!(h.events().all(|e| e.timestamp >= start && e.timestamp < start + world.truth.config.period_ms()));
        }
    }

    #[test]
    fn noiseless_linear_rule_depends_only_on_views() {
        let world = generate_world(&SyntheticWorldConfig { noise: 0.0, ..small(BookingRule::Linear, 2) }).unwrap();
        let rule = &world.truth.rule;
        for t in &world.truth.travelers {
            assert!((sigmoid(rule.logit(&t.mean_latent, t.views)) - t.true_probability).abs() < 1e-15);
        }
        let mean = vec![0.1, -0.2, 0.3, 0.0];
        assert_eq!(rule.logit(&mean, 7), rule.logit(&mean.clone(), 7));
    }

    #[test]
    fn browsing_stays_mostly_home() {
        let world = generate_world(&small(BookingRule::Linear, 5)).unwrap();
        let home: BTreeMap<&str, &str> =
            world.truth.travelers.iter().map(|t| (t.traveler_id.as_str(), t.home_destination.as_str())).collect();
        let views: Vec<&ActivityEvent> =
            world.events.iter().filter(|e| e.activity_type == ActivityType::View).collect();
        let at_home =
            views.iter().filter(|e| e.destination_id.as_deref() == Some(home[e.traveler_id.as_str()])).count();
        assert!(at_home as f64 / views.len() as f64 > 0.85);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_world(&SyntheticWorldConfig { n_travelers: 0, ..Default::default() }).is_err());
        let one_dim = SyntheticWorldConfig { latent_dim: 1, rule: BookingRule::Nonlinear, ..Default::default() };
        assert!(generate_world(&one_dim).is_err());
        assert!(generate_world(&SyntheticWorldConfig { click_prob: 1.5, ..Default::default() }).is_err());
    }
}
