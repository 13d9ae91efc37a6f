//! Wilcoxon signed-rank test, two-sided.
//!
//! Zero differences are dropped. For up to [`EXACT_MAX_N`] remaining pairs the p-value
//! comes from the exact permutation distribution of the positive-rank sum (with mid-ranks
//! for tied magnitudes); above that, from the normal approximation with tie correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{MetricsError, Result};

pub const EXACT_MAX_N: usize = 25;
pub const MIN_PAIRS: usize = 6;
/// Significance level used for report markers.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences (a - b > 0).
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

impl WilcoxonResult {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Mid-ranks of the values, ascending, ranks starting at 1.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p-value for the observed positive-rank sum, by dynamic programming
/// over the doubled (integral) ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total: f64 = counts.iter().sum();
    let observed = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=observed].iter().sum();
    let upper: f64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(ranks: &[f64], magnitudes: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // tie correction: subtract sum(t^3 - t)/48 over groups of tied magnitudes
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}

/// Paired test on `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.len() < MIN_PAIRS {
        return Err(MetricsError::TooFewPairs(diffs.len()));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&magnitudes);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let exact = diffs.len() <= EXACT_MAX_N;
    let p_value = if exact { exact_p(&ranks, w_plus) } else { normal_p(&ranks, &magnitudes, w_plus) };
    Ok(WilcoxonResult { w_plus, n: diffs.len(), p_value, exact })
}

/// One-sample test of the values' location against a constant.
pub fn wilcoxon_one_sample(values: &[f64], mu: f64) -> Result<WilcoxonResult> {
    let constant = vec![mu; values.len()];
    wilcoxon_signed_rank(values, &constant)
}
