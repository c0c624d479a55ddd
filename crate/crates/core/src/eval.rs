//! Error-detection ranking, calibration and sample-size bounds.

use std::cmp::Ordering;

use serde::Serialize;

use crate::confidence::ConfidenceAnnotation;
use crate::error::{Error, Result};

/// One scored unit for ranking: low confidence ranks first, ties keep input order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedUnit {
    pub nu: f64,
    pub is_error: bool,
}

impl RankedUnit {
    /// Units with a known correctness from a stream of annotations.
    pub fn from_annotations<'a>(
        annotations: impl IntoIterator<Item = &'a ConfidenceAnnotation>,
    ) -> Vec<Self> {
        annotations
            .into_iter()
            .filter_map(|a| {
                a.is_correct.map(|ok| RankedUnit {
                    nu: a.nu,
                    is_error: !ok,
                })
            })
            .collect()
    }
}

/// Error indicators in ranking order (ascending confidence, stable).
fn ranked_errors(units: &[RankedUnit]) -> Result<Vec<bool>> {
    if let Some(bad) = units.iter().find(|u| u.nu.is_nan()) {
        return Err(Error::ConfidenceRange(bad.nu));
    }
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| {
        units[a]
            .nu
            .partial_cmp(&units[b].nu)
            .unwrap_or(Ordering::Equal)
    });
    let flags: Vec<bool> = order.into_iter().map(|i| units[i].is_error).collect();
    if !flags.contains(&true) {
        return Err(Error::NoErrors);
    }
    Ok(flags)
}

/// Mean over the ranks of erroneous units of the precision at that rank.
pub fn average_precision(units: &[RankedUnit]) -> Result<f64> {
    let flags = ranked_errors(units)?;
    let mut found = 0usize;
    let mut total = 0.0;
    for (i, &is_error) in flags.iter().enumerate() {
        if is_error {
            found += 1;
            total += found as f64 / (i + 1) as f64;
        }
    }
    Ok(total / found as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision when the first `⌈r·E⌉` of the `E` errors have been retrieved,
/// for `r = 0.1, 0.2, …, 1.0`.
pub fn precision_recall_curve(units: &[RankedUnit]) -> Result<Vec<PrPoint>> {
    let flags = ranked_errors(units)?;
    let errors = flags.iter().filter(|&&e| e).count();
    // Rank (1-based) at which the i-th error appears.
    let positions: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, &e)| e)
        .map(|(i, _)| i + 1)
        .collect();
    Ok((1..=10)
        .map(|decile| {
            let needed = (decile * errors).div_ceil(10).max(1);
            PrPoint {
                recall: decile as f64 / 10.0,
                precision: needed as f64 / positions[needed - 1] as f64,
            }
        })
        .collect())
}

pub const CALIBRATION_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationBin {
    /// 1-based.
    pub index: usize,
    pub center: f64,
    pub count: usize,
    /// Fraction of correct units; `None` for an empty bin.
    pub accuracy: Option<f64>,
}

pub fn bin_center(index: usize) -> f64 {
    index as f64 / CALIBRATION_BINS as f64 - 1.0 / (2 * CALIBRATION_BINS) as f64
}

/// Bin `j` covers `[(j−1)/20, j/20)`; the last bin also holds `ν = 1`.
pub fn bin_index(nu: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::ConfidenceRange(nu));
    }
    Ok(((nu * CALIBRATION_BINS as f64).floor() as usize + 1).min(CALIBRATION_BINS))
}

/// Histogram of units by confidence with per-bin accuracy. `units` pairs a
/// confidence with whether the unit is correct.
pub fn calibration_bins(
    units: impl IntoIterator<Item = (f64, bool)>,
) -> Result<Vec<CalibrationBin>> {
    let mut counts = [0usize; CALIBRATION_BINS];
    let mut correct = [0usize; CALIBRATION_BINS];
    for (nu, ok) in units {
        let j = bin_index(nu)? - 1;
        counts[j] += 1;
        correct[j] += usize::from(ok);
    }
    Ok((0..CALIBRATION_BINS)
        .map(|j| CalibrationBin {
            index: j + 1,
            center: bin_center(j + 1),
            count: counts[j],
            accuracy: (counts[j] > 0).then(|| correct[j] as f64 / counts[j] as f64),
        })
        .collect())
}

/// Count-weighted root mean square distance between bin centers and accuracies.
pub fn calibration_rmse(bins: &[CalibrationBin]) -> Result<f64> {
    let mut total = 0usize;
    let mut sum = 0.0;
    for bin in bins {
        if let Some(acc) = bin.accuracy {
            let gap = bin.center - acc;
            sum += bin.count as f64 * gap * gap;
            total += bin.count;
        }
    }
    if total == 0 {
        return Err(Error::Empty("calibration bins"));
    }
    Ok((sum / total as f64).sqrt())
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `ln(2N/δ)`, the union-bound log term over `N` units.
pub fn union_log_term(n: u64, delta: f64) -> f64 {
    (2.0 * n as f64 / delta).ln()
}

/// Smallest `K` with `K ≥ ln(2N/δ) / (2ε²)`: enough samples for every one
/// of `N` units to estimate its correctness probability within `ε`, with
/// probability at least `1 − δ`.
pub fn chernoff_k(epsilon: f64, delta: f64, n: u64) -> Result<u64> {
    check_unit_open("epsilon", epsilon)?;
    check_unit_open("delta", delta)?;
    if n == 0 {
        return Err(Error::Config("N must be positive".into()));
    }
    let bound = union_log_term(n, delta) / (2.0 * epsilon * epsilon);
    Ok(bound.ceil().max(1.0) as u64)
}

/// Half-width of the variance-aware interval for a unit whose correctness
/// probability is `gamma`, estimated from `K` samples over `N` units.
pub fn bernstein_epsilon(gamma: f64, k: u64, n: u64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if k == 0 || n == 0 {
        return Err(Error::Config("K and N must be positive".into()));
    }
    check_unit_open("delta", delta)?;
    let l = union_log_term(n, delta);
    let k = k as f64;
    let a = 2.0 * l / 3.0;
    Ok((a + (a * a + 8.0 * k * l * gamma * (1.0 - gamma)).sqrt()) / (2.0 * k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(seq: &[(f64, bool)]) -> Vec<RankedUnit> {
        seq.iter()
            .map(|&(nu, is_error)| RankedUnit { nu, is_error })
            .collect()
    }

    #[test]
    fn ap_examples() {
        let perfect = units(&[(0.1, true), (0.2, true), (0.9, false)]);
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);
        let mixed = units(&[(0.1, true), (0.2, false), (0.3, true)]);
        assert!((average_precision(&mixed).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!(matches!(
            average_precision(&units(&[(0.5, false)])),
            Err(Error::NoErrors)
        ));
    }

    #[test]
    fn ties_keep_input_order() {
        let tied = units(&[(0.5, false), (0.5, true)]);
        assert_eq!(average_precision(&tied).unwrap(), 0.5);
    }

    #[test]
    fn pr_curve_extremes() {
        let perfect = units(&[(0.0, true), (0.1, true), (0.5, false), (0.6, false)]);
        assert!(precision_recall_curve(&perfect)
            .unwrap()
            .iter()
            .all(|p| p.precision == 1.0));
        let inverted = units(&[(0.9, true), (0.1, false), (0.2, false), (0.95, true)]);
        let last = *precision_recall_curve(&inverted).unwrap().last().unwrap();
        assert_eq!(last.recall, 1.0);
        assert_eq!(last.precision, 0.5);
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0).unwrap(), 1);
        assert_eq!(bin_center(1), 0.025);
        assert_eq!(bin_index(0.05).unwrap(), 2);
        assert_eq!(bin_index(1.0).unwrap(), 20);
        assert!(bin_index(1.01).is_err());
    }

    #[test]
    fn rmse_examples() {
        let bins = calibration_bins(vec![(1.0, true); 7]).unwrap();
        assert_eq!(bins[19].count, 7);
        assert!((calibration_rmse(&bins).unwrap() - 0.025).abs() < 1e-12);
        assert!(calibration_rmse(&calibration_bins(vec![]).unwrap()).is_err());
    }

    #[test]
    fn chernoff_reference_values() {
        assert_eq!(chernoff_k(0.05, 0.05, 500_000).unwrap(), 3363);
        assert_eq!(chernoff_k(0.05, 0.05, 25_000).unwrap(), 2764);
    }

    #[test]
    fn bernstein_degenerate_gamma() {
        let l = union_log_term(1000, 0.05);
        for gamma in [0.0, 1.0] {
            let eps = bernstein_epsilon(gamma, 50, 1000, 0.05).unwrap();
            assert!((eps - 2.0 * l / 150.0).abs() < 1e-12);
        }
        assert!(
            bernstein_epsilon(0.5, 50, 1000, 0.05).unwrap()
                >= bernstein_epsilon(0.95, 50, 1000, 0.05).unwrap()
        );
    }
}
