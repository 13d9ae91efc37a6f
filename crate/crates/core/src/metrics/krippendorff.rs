//! Krippendorff's alpha from the coincidence matrix, for nominal, ordinal and interval data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    #[default]
    Ordinal,
    Interval,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nominal" => Ok(Level::Nominal),
            "ordinal" => Ok(Level::Ordinal),
            "interval" => Ok(Level::Interval),
            _ => Err(format!("unknown measurement level {s:?}")),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Nominal => "nominal",
            Level::Ordinal => "ordinal",
            Level::Interval => "interval",
        })
    }
}

/// Alpha over units, each unit holding the values assigned by its coders. Units with
/// fewer than two values are not pairable and are ignored.
///
/// Values are compared exactly; the distinct observed values form the value domain.
pub fn alpha(units: &[Vec<i64>], level: Level) -> Result<f64> {
    let pairable: Vec<&Vec<i64>> = units.iter().filter(|u| u.len() >= 2).collect();
    if pairable.is_empty() {
        return Err(MetricsError::Undefined("no unit has two or more values".into()));
    }
    let mut domain: Vec<i64> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    domain.sort_unstable();
    domain.dedup();
    let pos: BTreeMap<i64, usize> = domain.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let k = domain.len();

    let mut coincidence = vec![vec![0.0f64; k]; k];
    for u in &pairable {
        let w = 1.0 / (u.len() - 1) as f64;
        for (i, a) in u.iter().enumerate() {
            for (j, b) in u.iter().enumerate() {
                if i != j {
                    coincidence[pos[a]][pos[b]] += w;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        match level {
            Level::Nominal => f64::from(u8::from(c != d)),
            Level::Interval => {
                let diff = (domain[c] - domain[d]) as f64;
                diff * diff
            }
            Level::Ordinal => {
                let (lo, hi) = (c.min(d), c.max(d));
                let between: f64 = marginals[lo..=hi].iter().sum();
                let v = between - (marginals[lo] + marginals[hi]) / 2.0;
                v * v
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dist = delta(c, d);
            observed += coincidence[c][d] * dist;
            expected += marginals[c] * marginals[d] * dist;
        }
    }
    expected /= n - 1.0;
    if expected == 0.0 {
        return Err(MetricsError::Undefined("expected disagreement is zero".into()));
    }
    Ok(1.0 - observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_agreement_is_one() {
        let units = vec![vec![1, 1, 1], vec![3, 3, 3], vec![5, 5]];
        for level in [Level::Nominal, Level::Ordinal, Level::Interval] {
            assert_abs_diff_eq!(alpha(&units, level).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_coders_two_items_interval() {
        // coincidences o(1,5)=o(5,1)=2, n1=n5=2, n=4
        // Do = 2*16 + 2*16 = 64, De = (2*2*16 + 2*2*16)/3 = 128/3, alpha = 1 - 1.5
        let units = vec![vec![1, 5], vec![5, 1]];
        assert_abs_diff_eq!(alpha(&units, Level::Interval).unwrap(), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha(&units, Level::Nominal).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_values_are_undefined() {
        assert!(matches!(alpha(&[vec![2, 2], vec![2, 2]], Level::Ordinal), Err(MetricsError::Undefined(_))));
        assert!(matches!(alpha(&[vec![2]], Level::Ordinal), Err(MetricsError::Undefined(_))));
    }

    #[test]
    fn textbook_nominal_example() {
        // Krippendorff's reliability-data example: 4 coders, 12 units, missing values dropped
        let units = vec![
            vec![1, 1, 1],
            vec![2, 2, 3, 2],
            vec![3, 3, 3, 3],
            vec![3, 3, 3, 3],
            vec![2, 2, 2, 2],
            vec![1, 2, 3, 4],
            vec![4, 4, 4, 4],
            vec![1, 1, 2, 1],
            vec![2, 2, 2, 2],
            vec![5, 5, 5],
            vec![1, 1],
            vec![3],
        ];
        assert_abs_diff_eq!(alpha(&units, Level::Nominal).unwrap(), 0.743, epsilon = 5e-4);
        assert_abs_diff_eq!(alpha(&units, Level::Ordinal).unwrap(), 0.815, epsilon = 5e-4);
        assert_abs_diff_eq!(alpha(&units, Level::Interval).unwrap(), 0.849, epsilon = 5e-4);
    }
}
