//! Funnel buckets: quantile thresholds over the bid utility `u = r·m`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::util::{midranks, parse_f64};
use crate::{Error, Result};

pub const DEFAULT_BUCKETS: usize = 10;

const MAGIC: &str = "DPRT-BKT";
const WHAT: &str = "bucket thresholds";

/// Scalar the thresholds are fitted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketKey {
    #[default]
    Utility,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    pub traveler_id: String,
    pub r: f64,
    pub m: f64,
    pub u: f64,
}

/// `r·m` for a probability `r` and a non-negative value `m`.
pub fn utility(r: f64, m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("probability {r} outside [0, 1]")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("value {m} must be finite and non-negative")));
    }
    Ok(r * m)
}

impl UtilityScore {
    pub fn new(traveler_id: impl Into<String>, r: f64, m: f64) -> Result<Self> {
        let u = utility(r, m)?;
        Ok(UtilityScore { traveler_id: traveler_id.into(), r, m, u })
    }

    pub fn key(&self, key: BucketKey) -> f64 {
        match key {
            BucketKey::Utility => self.u,
            BucketKey::Probability => self.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketThresholds {
    cuts: Vec<f64>,
}

impl BucketThresholds {
    pub fn from_cuts(cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidInput("need at least two buckets".into()));
        }
        if cuts.iter().any(|c| c.is_nan()) || cuts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("cuts must be sorted and not NaN".into()));
        }
        Ok(BucketThresholds { cuts })
    }

    pub fn n_buckets(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Smallest `k` in `1..N` with `u <= cut_k`, else `N`.
    pub fn assign(&self, u: f64) -> usize {
        self.cuts.partition_point(|&c| c < u) + 1
    }
}

/// Cuts at the `k/N` empirical quantiles: the sorted value at index `ceil(k·n/N) − 1`.
pub fn fit_thresholds(scores: &[f64], n_buckets: usize) -> Result<BucketThresholds> {
    if n_buckets < 2 {
        return Err(Error::InvalidInput(format!("{n_buckets} buckets; need at least 2")));
    }
    if scores.len() < n_buckets {
        return Err(Error::InvalidInput(format!("{} scores for {n_buckets} buckets", scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts = (1..n_buckets).map(|k| sorted[(k * n).div_ceil(n_buckets) - 1]).collect();
    BucketThresholds::from_cuts(cuts)
}

/// What happened to a traveler after scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub booked: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: usize,
    pub count: usize,
    pub mean_predicted_utility: Option<f64>,
    pub booking_rate: Option<f64>,
    /// Mean booking value among bookers.
    pub mean_value: Option<f64>,
    /// Realized revenue divided by travelers in the bucket.
    pub mean_rpc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub buckets: Vec<BucketStats>,
    /// Rank correlation of bucket index with mean RPC over non-empty buckets.
    pub spearman: Option<f64>,
}

/// Pearson correlation of midranks. `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn bucket_report(
    n_buckets: usize,
    assignments: &[usize],
    predicted: &[f64],
    outcomes: &[Outcome],
) -> Result<BucketReport> {
    if assignments.len() != outcomes.len() || predicted.len() != outcomes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} assignments, {} predictions, {} outcomes",
            assignments.len(),
            predicted.len(),
            outcomes.len()
        )));
    }
    #[derive(Default, Clone)]
    struct Acc {
        count: usize,
        utility: f64,
        booked: usize,
        revenue: f64,
    }
    let mut acc = vec![Acc::default(); n_buckets];
    for ((&b, &u), o) in assignments.iter().zip(predicted).zip(outcomes) {
        if b == 0 || b > n_buckets {
            return Err(Error::InvalidInput(format!("bucket {b} outside 1..={n_buckets}")));
        }
        let a = &mut acc[b - 1];
        a.count += 1;
        a.utility += u;
        if o.booked {
            a.booked += 1;
            a.revenue += o.value;
        }
    }
    let buckets: Vec<BucketStats> = acc
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let per = |x: f64| (a.count > 0).then(|| x / a.count as f64);
            BucketStats {
                bucket: i + 1,
                count: a.count,
                mean_predicted_utility: per(a.utility),
                booking_rate: per(a.booked as f64),
                mean_value: (a.booked > 0).then(|| a.revenue / a.booked as f64),
                mean_rpc: per(a.revenue),
            }
        })
        .collect();
    let (idx, rpc): (Vec<f64>, Vec<f64>) =
        buckets.iter().filter_map(|b| b.mean_rpc.map(|r| (b.bucket as f64, r))).unzip();
    Ok(BucketReport { spearman: spearman(&idx, &rpc), buckets })
}

pub fn write_thresholds<W: Write>(mut out: W, t: &BucketThresholds) -> Result<()> {
    writeln!(out, "{MAGIC} 1 {}", t.n_buckets())?;
    let cuts: Vec<String> = t.cuts.iter().map(|c| format!("{c:?}")).collect();
    writeln!(out, "{}", cuts.join(" "))?;
    Ok(())
}

pub fn read_thresholds<R: BufRead>(input: R) -> Result<BucketThresholds> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::format(WHAT, 1, "empty input"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let n: usize = match tokens.as_slice() {
        [MAGIC, "1", n] => n.parse().map_err(|_| Error::format(WHAT, 1, "bad bucket count"))?,
        _ => return Err(Error::format(WHAT, 1, format!("expected `{MAGIC} 1 <N>` header"))),
    };
    let body = lines.next().transpose()?.unwrap_or_default();
    let cuts = body.split_whitespace().map(|t| parse_f64(t, WHAT, 2)).collect::<Result<Vec<_>>>()?;
    if cuts.len() + 1 != n {
        return Err(Error::format(WHAT, 2, format!("{} cuts for {n} buckets", cuts.len())));
    }
    BucketThresholds::from_cuts(cuts).map_err(|e| Error::format(WHAT, 2, e.to_string()))
}

/// One line of bucket output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRecord {
    pub traveler_id: String,
    pub r: f64,
    pub m: f64,
    pub u: f64,
    pub bucket: usize,
}

impl BucketRecord {
    pub fn new(score: &UtilityScore, thresholds: &BucketThresholds, key: BucketKey) -> Self {
        BucketRecord {
            traveler_id: score.traveler_id.clone(),
            r: score.r,
            m: score.m,
            u: score.u,
            bucket: thresholds.assign(score.key(key)),
        }
    }
}
