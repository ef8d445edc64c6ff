//! Drift gate for admitting series against cached medians.
//!
//! P is the distribution over time of `|x[t] - z[t]|` for the candidate series,
//! Q the distribution over time of the cached `mad[t]`. Both are binned over
//! their pooled range with add-one smoothing and the gate reports `KL(P || Q)`.

use serde::{Deserialize, Serialize};

use super::stats::CrossSectionStats;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    pub threshold: f64,
    pub bin_count: usize,
    pub approx_budget: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { threshold: 10.0, bin_count: 32, approx_budget: 64 }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!("drift threshold must be > 0, got {}", self.threshold)));
        }
        if self.bin_count < 2 {
            return Err(Error::Config(format!("bin_count must be >= 2, got {}", self.bin_count)));
        }
        if self.approx_budget == 0 {
            return Err(Error::Config("approx_budget must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftScore {
    pub kl: f64,
    /// Fewer time points than bins.
    pub low_confidence: bool,
}

/// KL divergence of the candidate's absolute deviations from the cached MADs.
pub fn drift_check(stats: &[CrossSectionStats], series: &[f64], bin_count: usize) -> DriftScore {
    debug_assert_eq!(stats.len(), series.len());
    let p: Vec<f64> = series.iter().zip(stats).map(|(x, s)| (x - s.z).abs()).collect();
    let q: Vec<f64> = stats.iter().map(|s| s.mad).collect();
    DriftScore { kl: histogram_kl(&p, &q, bin_count), low_confidence: stats.len() < bin_count }
}

/// `KL(P || Q)` between add-one-smoothed histograms of two samples over
/// their pooled range.
pub fn histogram_kl(p: &[f64], q: &[f64], bin_count: usize) -> f64 {
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    let (lo, hi) = p
        .iter()
        .chain(q)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return 0.0;
    }
    let hp = histogram(p, lo, hi, bin_count);
    let hq = histogram(q, lo, hi, bin_count);
    let np = p.len() as f64 + bin_count as f64;
    let nq = q.len() as f64 + bin_count as f64;
    hp.iter()
        .zip(&hq)
        .map(|(&cp, &cq)| {
            let pp = (cp + 1.0) / np;
            let qq = (cq + 1.0) / nq;
            pp * (pp / qq).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let width = hi - lo;
    for &v in values {
        let idx = (((v - lo) / width) * bins as f64) as usize;
        h[idx.min(bins - 1)] += 1.0;
    }
    h
}

/// Gate state for progressive series admission.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftMonitor {
    pub config: DriftConfig,
    /// Series admitted approximately since the last full fit.
    pub approx_count: usize,
    pub pending_recompute: bool,
}

impl DriftMonitor {
    pub fn new(config: DriftConfig) -> Self {
        DriftMonitor { config, approx_count: 0, pending_recompute: false }
    }

    /// Record one approximate admission and decide whether a full refit is due.
    pub fn admit(&mut self, score: &DriftScore) -> bool {
        self.approx_count += 1;
        let due = score.kl > self.config.threshold || self.approx_count >= self.config.approx_budget;
        if due {
            self.pending_recompute = true;
        }
        due
    }

    pub fn reset(&mut self) {
        self.approx_count = 0;
        self.pending_recompute = false;
    }
}
