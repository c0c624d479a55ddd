//! Trading precision against recall for entity tagging by thresholding
//! per-word confidence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::entities::{entity_prf, is_entity, merge_categories, OUTSIDE};
use crate::chain::MaxMarginals;
use crate::error::{Error, Result};
use crate::instance::ChainInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeoffDirection {
    /// Drop low-confidence entity tags.
    PrecisionGain,
    /// Tag low-confidence outside words with their best entity label.
    RecallGain,
}

impl fmt::Display for TradeoffDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TradeoffDirection::PrecisionGain => "precision",
            TradeoffDirection::RecallGain => "recall",
        })
    }
}

impl FromStr for TradeoffDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precision" | "precision-gain" => Ok(TradeoffDirection::PrecisionGain),
            "recall" | "recall-gain" => Ok(TradeoffDirection::RecallGain),
            other => Err(Error::Config(format!(
                "unknown tradeoff direction `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    pub t: f64,
    pub direction: TradeoffDirection,
    /// Recall gain only: collapse all entity categories into one.
    pub merge_categories: bool,
}

/// Tags after thresholding, with the positions that changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub tags: Vec<String>,
    pub replaced: Vec<usize>,
}

fn check(t: f64, predicted: usize, nu: &[f64]) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!("t must lie in [0, 1], got {t}")));
    }
    if nu.len() != predicted {
        return Err(Error::ShapeMismatch {
            expected: predicted,
            actual: nu.len(),
        });
    }
    match nu.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&bad) => Err(Error::ConfidenceRange(bad)),
        None => Ok(()),
    }
}

/// Replaces entity tags whose confidence is below `t` with the outside tag.
pub fn apply_precision_tradeoff<S: AsRef<str>>(
    predicted: &[S],
    nu: &[f64],
    t: f64,
) -> Result<Revision> {
    check(t, predicted.len(), nu)?;
    let mut replaced = Vec::new();
    let tags = predicted
        .iter()
        .zip(nu)
        .enumerate()
        .map(|(p, (tag, &v))| {
            let tag = tag.as_ref();
            if is_entity(tag) && v < t {
                replaced.push(p);
                OUTSIDE.to_owned()
            } else {
                tag.to_owned()
            }
        })
        .collect();
    Ok(Revision { tags, replaced })
}

/// Replaces outside tags whose confidence is below `t` with the runner-up
/// entity label at that position. When `merge` is set every entity tag,
/// old or new, becomes `B-NE` or `I-NE`.
pub fn apply_recall_tradeoff<S: AsRef<str>, R: AsRef<str>>(
    predicted: &[S],
    nu: &[f64],
    runner_up: &[R],
    t: f64,
    merge: bool,
) -> Result<Revision> {
    check(t, predicted.len(), nu)?;
    if runner_up.len() != predicted.len() {
        return Err(Error::ShapeMismatch {
            expected: predicted.len(),
            actual: runner_up.len(),
        });
    }
    let mut replaced = Vec::new();
    let mut tags: Vec<String> = predicted
        .iter()
        .zip(nu)
        .zip(runner_up)
        .enumerate()
        .map(|(p, ((tag, &v), alt))| {
            let tag = tag.as_ref();
            if tag == OUTSIDE && v < t && is_entity(alt.as_ref()) {
                replaced.push(p);
                alt.as_ref().to_owned()
            } else {
                tag.to_owned()
            }
        })
        .collect();
    if merge {
        tags = merge_categories(&tags);
    }
    Ok(Revision { tags, replaced })
}

/// For every position, the entity label with the best score among outputs
/// forced to take it (lowest label id on ties).
pub fn best_entity_labels<S: AsRef<str>>(
    x: &ChainInstance,
    weights: &[f64],
    labels: &[S],
) -> Result<Vec<String>> {
    if labels.len() != x.labels() {
        return Err(Error::ShapeMismatch {
            expected: x.labels(),
            actual: labels.len(),
        });
    }
    let mm = MaxMarginals::new(&x.potentials(weights)?);
    let entities: Vec<usize> = (0..labels.len())
        .filter(|&y| is_entity(labels[y].as_ref()))
        .collect();
    Ok((0..x.len())
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for &y in &entities {
                let s = mm.forced(p, y);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((y, s));
                }
            }
            best.map_or_else(
                || OUTSIDE.to_owned(),
                |(y, _)| labels[y].as_ref().to_owned(),
            )
        })
        .collect())
}

/// Per-sentence inputs to a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffInput {
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
    pub nu: Vec<f64>,
    /// Needed for recall gain only.
    pub runner_up: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub t: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub replaced: usize,
}

/// Entity precision, recall and F1 after thresholding at each `t`.
pub fn tradeoff_sweep(
    inputs: &[TradeoffInput],
    thresholds: &[f64],
    direction: TradeoffDirection,
    merge: bool,
) -> Result<Vec<TradeoffPoint>> {
    let merge = merge && direction == TradeoffDirection::RecallGain;
    let gold: Vec<Vec<String>> = inputs
        .iter()
        .map(|s| {
            if merge {
                merge_categories(&s.gold)
            } else {
                s.gold.clone()
            }
        })
        .collect();
    thresholds
        .iter()
        .map(|&t| {
            let mut replaced = 0;
            let revised = inputs
                .iter()
                .map(|s| {
                    let r = match direction {
                        TradeoffDirection::PrecisionGain => {
                            apply_precision_tradeoff(&s.predicted, &s.nu, t)?
                        }
                        TradeoffDirection::RecallGain => {
                            apply_recall_tradeoff(&s.predicted, &s.nu, &s.runner_up, t, merge)?
                        }
                    };
                    replaced += r.replaced.len();
                    Ok(r.tags)
                })
                .collect::<Result<Vec<_>>>()?;
            let prf = entity_prf(&gold, &revised)?;
            Ok(TradeoffPoint {
                t,
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                replaced,
            })
        })
        .collect()
}

/// `steps + 1` evenly spaced thresholds from 0 to 1.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| i as f64 / steps.max(1) as f64)
        .collect()
}
