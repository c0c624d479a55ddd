//! The linear model container shared by learners and confidence estimators.

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Dense mean weights, an optional diagonal covariance and a running average
/// of the post-update mean snapshots.
///
/// The average is maintained lazily: with `acc = Σ_s (s-1)·Δ_s` over the
/// updates `Δ_s` applied at step `s`, the mean of the first `T` snapshots is
/// `mu - acc / T`. [`LinearModel::average`] materializes it into `avg_mu`.
/// Equality ignores the accumulator.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub mu: Vec<f64>,
    pub sigma_diag: Option<Vec<f64>>,
    pub avg_mu: Vec<f64>,
    pub update_count: usize,
    dimension: usize,
    avg_acc: Vec<f64>,
}

impl PartialEq for LinearModel {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu
            && self.sigma_diag == other.sigma_diag
            && self.avg_mu == other.avg_mu
            && self.update_count == other.update_count
    }
}

impl LinearModel {
    pub fn new(dimension: usize) -> Self {
        Self {
            mu: vec![0.0; dimension],
            sigma_diag: None,
            avg_mu: vec![0.0; dimension],
            update_count: 0,
            dimension,
            avg_acc: vec![0.0; dimension],
        }
    }

    /// A model carrying a covariance diagonal initialized to `initial_variance · I`.
    pub fn with_covariance(dimension: usize, initial_variance: f64) -> Result<Self> {
        if !(initial_variance > 0.0) || !initial_variance.is_finite() {
            return Err(Error::Config(format!(
                "initial variance must be positive, got {initial_variance}"
            )));
        }
        let mut model = Self::new(dimension);
        model.sigma_diag = Some(vec![initial_variance; dimension]);
        Ok(model)
    }

    /// Reassembles a model from stored parts.
    pub fn from_parts(
        mu: Vec<f64>,
        sigma_diag: Option<Vec<f64>>,
        avg_mu: Vec<f64>,
        update_count: usize,
    ) -> Result<Self> {
        let dimension = mu.len();
        if avg_mu.len() != dimension {
            return Err(Error::ShapeMismatch {
                expected: dimension,
                actual: avg_mu.len(),
            });
        }
        if let Some(sigma) = &sigma_diag {
            if sigma.len() != dimension {
                return Err(Error::ShapeMismatch {
                    expected: dimension,
                    actual: sigma.len(),
                });
            }
            if let Some(bad) = sigma.iter().find(|&&s| !(s > 0.0)) {
                return Err(Error::Invariant(format!(
                    "covariance diagonal must be positive, found {bad}"
                )));
            }
        }
        // Recover the accumulator from a materialized average so further
        // training keeps averaging over every step.
        let t = update_count as f64;
        let avg_acc = mu.iter().zip(&avg_mu).map(|(m, a)| t * (m - a)).collect();
        Ok(Self {
            avg_acc,
            mu,
            sigma_diag,
            avg_mu,
            update_count,
            dimension,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn score(&self, features: &SparseVector) -> Result<f64> {
        features.dot(&self.mu)
    }

    /// `mu += scale * direction`, keeping the averaging accumulator in step.
    /// Must be called before [`LinearModel::advance`] closes the step.
    pub(crate) fn add_to_mean(&mut self, direction: &SparseVector, scale: f64) {
        let step_index = self.update_count as f64;
        for (id, v) in direction.iter() {
            let delta = scale * v;
            self.mu[id] += delta;
            self.avg_acc[id] += step_index * delta;
        }
    }

    /// Closes one training step (a snapshot of `mu` joins the average).
    pub(crate) fn advance(&mut self) {
        self.update_count += 1;
    }

    /// Writes the mean of all post-step snapshots into `avg_mu`.
    pub fn average(&mut self) {
        if self.update_count == 0 {
            self.avg_mu.clone_from(&self.mu);
            return;
        }
        let t = self.update_count as f64;
        for ((avg, &mu), &acc) in self.avg_mu.iter_mut().zip(&self.mu).zip(&self.avg_acc) {
            *avg = mu - acc / t;
        }
    }

    /// Weights used for prediction: the average when requested.
    pub fn prediction_weights(&self, averaged: bool) -> &[f64] {
        if averaged {
            &self.avg_mu
        } else {
            &self.mu
        }
    }
}

/// Number of positions where two labelings (or head assignments) differ.
pub fn hamming_loss(gold: &[usize], predicted: &[usize]) -> Result<usize> {
    if gold.len() != predicted.len() {
        return Err(Error::ShapeMismatch {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    Ok(gold.iter().zip(predicted).filter(|(a, b)| a != b).count())
}
