//! Grid search of confidence parameters by error-detection average
//! precision on held-out data.

use serde::Serialize;

use crate::confidence::{annotate_batch, ConfidenceConfig, Method};
use crate::error::{Error, Result};
use crate::eval::{average_precision, RankedUnit};
use crate::instance::Structured;
use crate::model::LinearModel;

/// `count` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Candidate values per parameter. Only the parameters a method uses are
/// searched; the others keep the base configuration's values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub s: Vec<f64>,
    pub k: Vec<usize>,
    pub c: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            s: geometric_grid(0.01, 1.0, 20),
            k: (1..=8).map(|i| 10 * i).collect(),
            c: geometric_grid(0.01, 3.0, 30),
        }
    }
}

impl Grid {
    /// Candidate configurations in ascending parameter order.
    pub fn candidates(&self, base: &ConfidenceConfig) -> Vec<ConfidenceConfig> {
        let sorted_f = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        let mut ks = self.k.clone();
        ks.sort_unstable();
        match base.method {
            Method::KdFix | Method::KdPc | Method::KdFixDelta => sorted_f(&self.s)
                .into_iter()
                .map(|s| ConfidenceConfig { s, ..base.clone() })
                .collect(),
            Method::Kb | Method::Wkb => ks
                .into_iter()
                .map(|k| ConfidenceConfig { k, ..base.clone() })
                .collect(),
            Method::Gamma => sorted_f(&self.c)
                .into_iter()
                .map(|c| ConfidenceConfig { c, ..base.clone() })
                .collect(),
            Method::Delta | Method::Random => vec![base.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub config: ConfidenceConfig,
    pub average_precision: f64,
    /// Every candidate with its score, in search order.
    pub trials: Vec<(ConfidenceConfig, f64)>,
}

/// Average precision of `cfg` at detecting wrong units of `dev`.
pub fn dev_average_precision<S: Structured>(
    dev: &[S],
    model: &LinearModel,
    cfg: &ConfidenceConfig,
) -> Result<f64> {
    let annotations = annotate_batch(dev, model, cfg)?;
    average_precision(&RankedUnit::from_annotations(annotations.iter().flatten()))
}

/// Exhaustive search for the configuration with the best dev average
/// precision; ties go to the smallest parameter value.
pub fn tune<S: Structured>(
    dev: &[S],
    model: &LinearModel,
    base: &ConfidenceConfig,
    grid: &Grid,
) -> Result<TuneResult> {
    let candidates = grid.candidates(base);
    if candidates.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    let mut best: Option<(ConfidenceConfig, f64)> = None;
    let mut trials = Vec::with_capacity(candidates.len());
    for cfg in candidates {
        let ap = dev_average_precision(dev, model, &cfg)?;
        log::debug!(
            "{} s={} k={} c={}: AP {ap:.4}",
            cfg.method,
            cfg.s,
            cfg.k,
            cfg.c
        );
        if best.as_ref().is_none_or(|(_, b)| ap > *b) {
            best = Some((cfg.clone(), ap));
        }
        trials.push((cfg, ap));
    }
    let (config, average_precision) = best.expect("at least one candidate");
    Ok(TuneResult {
        config,
        average_precision,
        trials,
    })
}
