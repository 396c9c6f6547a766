//! Offline metrics and the two-period temporal split.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::ActivityEvent;
use crate::util::midranks;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Area under the ROC curve via midranks; ties count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False when nothing was predicted positive; precision is then reported as 0.
    pub precision_defined: bool,
}

/// Confusion-matrix metrics with `score >= threshold` predicted positive.
pub fn prf1(scores: &[f64], labels: &[bool], threshold: f64) -> Prf1 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision_defined = tp + fp > 0;
    let precision = if precision_defined { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Prf1 { precision, recall, f1, precision_defined }
}

pub fn threshold_sweep(scores: &[f64], labels: &[bool], thresholds: &[f64]) -> Vec<(f64, Prf1)> {
    thresholds.iter().map(|&t| (t, prf1(scores, labels, t))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub setting: String,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub fn evaluate(setting: impl Into<String>, scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricReport> {
    let auc = auc(scores, labels)?;
    let m = prf1(scores, labels, threshold);
    let positives = labels.iter().filter(|&&l| l).count();
    Ok(MetricReport {
        setting: setting.into(),
        auc,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        threshold,
        positives,
        negatives: labels.len() - positives,
    })
}

/// Aligned text table, one row per report.
pub fn format_table(reports: &[MetricReport]) -> String {
    let header = ["Model Setting", "AUC", "Precision", "Recall", "F1-Score"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.setting.clone(),
                format!("{:.4}", r.auc),
                format!("{:.4}", r.precision),
                format!("{:.4}", r.recall),
                format!("{:.4}", r.f1),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 5]| {
        let _ = write!(out, "{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    };
    line(&mut out, header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    out
}

/// Events before `boundary` and events at or after it.
pub fn temporal_split(events: &[ActivityEvent], boundary: i64) -> Result<(Vec<ActivityEvent>, Vec<ActivityEvent>)> {
    let (before, after): (Vec<_>, Vec<_>) = events.iter().cloned().partition(|e| e.timestamp < boundary);
    if before.is_empty() || after.is_empty() {
        return Err(Error::InvalidInput(format!(
            "boundary {boundary} leaves {} events before and {} after",
            before.len(),
            after.len()
        )));
    }
    Ok((before, after))
}
