//! Online learners for structured outputs: averaged perceptron, PA-I,
//! diagonal confidence-weighted (CW) learning and n-best PA.
//!
//! Every learner reduces a round to a binary problem on the direction
//! `g = Φ(x, y) − Φ(x, ŷ)` with loss `ℓ = Hamming(y, ŷ)`. When the prediction
//! is correct `g` is empty and the round is a no-op; the averaging clock
//! still advances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Structured;
use crate::model::{hamming_loss, LinearModel};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Perceptron,
    Pa,
    Cw,
    NbestPa,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Perceptron => "perceptron",
            Algorithm::Pa => "pa",
            Algorithm::Cw => "cw",
            Algorithm::NbestPa => "nbest-pa",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perceptron" => Ok(Algorithm::Perceptron),
            "pa" => Ok(Algorithm::Pa),
            "cw" => Ok(Algorithm::Cw),
            "nbest-pa" | "nbest_pa" => Ok(Algorithm::NbestPa),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// PA aggressiveness.
    pub c: f64,
    /// CW confidence parameter.
    pub phi: f64,
    /// CW initial variance.
    pub initial_variance: f64,
    pub nbest_k: usize,
    pub epochs: usize,
    /// Recorded with the model; the driver itself visits instances in a fixed order.
    pub seed: u64,
    pub averaging: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cw,
            c: 1.0,
            phi: 1.0,
            initial_variance: 1.0,
            nbest_k: 5,
            epochs: 10,
            seed: 0,
            averaging: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("C", self.c)?;
        positive("phi", self.phi)?;
        positive("initial variance", self.initial_variance)?;
        if self.nbest_k == 0 {
            return Err(Error::Config("nbest k must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// What one binary sub-update did.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateRecord {
    pub alpha: f64,
    pub beta: f64,
    pub loss: usize,
    /// `μ·g` before the update.
    pub margin: f64,
    /// `gᵀΣg` before the update (CW only).
    pub variance: f64,
}

fn direction<S: Structured + ?Sized>(x: &S, predicted: &[usize]) -> Result<(SparseVector, usize)> {
    let loss = hamming_loss(x.gold(), predicted)?;
    Ok((x.feature_difference(x.gold(), predicted), loss))
}

fn perceptron_step<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    predicted: &[usize],
) -> Result<UpdateRecord> {
    let (g, loss) = direction(x, predicted)?;
    if g.is_empty() {
        return Ok(UpdateRecord {
            loss,
            ..Default::default()
        });
    }
    let margin = g.dot(&model.mu)?;
    model.add_to_mean(&g, 1.0);
    Ok(UpdateRecord {
        alpha: 1.0,
        loss,
        margin,
        ..Default::default()
    })
}

/// PA-I step size `min{C, max{0, ℓ − μ·g} / ‖g‖²}`.
pub fn pa_step_size(loss: f64, margin: f64, squared_norm: f64, c: f64) -> f64 {
    c.min((loss - margin).max(0.0) / squared_norm)
}

fn pa_step<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    predicted: &[usize],
    c: f64,
) -> Result<UpdateRecord> {
    let (g, loss) = direction(x, predicted)?;
    if g.is_empty() {
        return Ok(UpdateRecord {
            loss,
            ..Default::default()
        });
    }
    let margin = g.dot(&model.mu)?;
    let alpha = pa_step_size(loss as f64, margin, g.squared_norm(), c);
    if alpha > 0.0 {
        model.add_to_mean(&g, alpha);
    }
    Ok(UpdateRecord {
        alpha,
        loss,
        margin,
        ..Default::default()
    })
}

/// CW step sizes `(α, β)` for margin mean `m`, margin variance `v` and
/// `φ_ℓ = φ·ℓ`.
pub fn cw_step_sizes(margin: f64, variance: f64, phi_loss: f64) -> (f64, f64) {
    let phi2 = phi_loss * phi_loss;
    let phi_prime = 1.0 + phi2 / 2.0;
    let phi_second = 1.0 + phi2;
    let disc = margin * margin * phi2 * phi2 / 4.0 + variance * phi2 * phi_second;
    let alpha = ((-margin * phi_prime + disc.sqrt()) / (variance * phi_second)).max(0.0);
    if alpha == 0.0 {
        return (0.0, 0.0);
    }
    let root = -alpha * variance * phi_loss
        + (alpha * alpha * variance * variance * phi2 + 4.0 * variance).sqrt();
    let post_variance = root * root / 4.0;
    let beta = alpha * phi_loss / post_variance.sqrt();
    (alpha, beta)
}

fn cw_step<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    predicted: &[usize],
    phi: f64,
) -> Result<UpdateRecord> {
    let (g, loss) = direction(x, predicted)?;
    if g.is_empty() {
        return Ok(UpdateRecord {
            loss,
            ..Default::default()
        });
    }
    let margin = g.dot(&model.mu)?;
    let sigma = model
        .sigma_diag
        .as_ref()
        .ok_or_else(|| Error::Config("CW requires a model with a covariance diagonal".into()))?;
    let variance: f64 = g.iter().map(|(id, v)| v * v * sigma[id]).sum();
    if !(variance > 0.0) {
        return Err(Error::Invariant(format!(
            "margin variance {variance} is not positive for a non-empty update direction"
        )));
    }
    let (alpha, beta) = cw_step_sizes(margin, variance, phi * loss as f64);
    if alpha > 0.0 {
        // μ ← μ + αΣg with the pre-update Σ.
        let scaled = SparseVector::from_pairs(g.iter().map(|(id, v)| (id, v * sigma[id])));
        model.add_to_mean(&scaled, alpha);
        // Full-rank covariance update Σ − Σg gᵀΣ·β/(1+βv), then keep the diagonal.
        let shrink = beta / (1.0 + beta * variance);
        let sigma = model.sigma_diag.as_mut().expect("checked above");
        for (id, v) in g.iter() {
            let s = sigma[id];
            sigma[id] = s - shrink * s * s * v * v;
        }
    }
    Ok(UpdateRecord {
        alpha,
        beta,
        loss,
        margin,
        variance,
    })
}

/// Decodes with the current mean and applies a perceptron step.
pub fn perceptron_update<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
) -> Result<UpdateRecord> {
    let (predicted, _) = x.decode(&model.mu)?;
    let record = perceptron_step(model, x, &predicted)?;
    model.advance();
    Ok(record)
}

pub fn pa_update<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    c: f64,
) -> Result<UpdateRecord> {
    let (predicted, _) = x.decode(&model.mu)?;
    let record = pa_step(model, x, &predicted, c)?;
    model.advance();
    Ok(record)
}

pub fn cw_update<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    phi: f64,
) -> Result<UpdateRecord> {
    let (predicted, _) = x.decode(&model.mu)?;
    let record = cw_step(model, x, &predicted, phi)?;
    model.advance();
    Ok(record)
}

/// Decodes the `k` best outputs once with the pre-update mean, then applies
/// PA steps for each of them in score order against the evolving mean.
/// Outputs equal to the gold contribute a zero record.
pub fn nbest_pa_update<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    c: f64,
    k: usize,
) -> Result<Vec<UpdateRecord>> {
    let predictions = x.kbest(&model.mu, k)?;
    let mut records = Vec::with_capacity(predictions.len());
    for (predicted, _) in &predictions {
        records.push(pa_step(model, x, predicted, c)?);
    }
    model.advance();
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Instances whose pre-update prediction differed from the gold.
    pub mistakes: usize,
    pub total_loss: usize,
    pub units: usize,
}

fn new_model(config: &TrainConfig, dimension: usize) -> Result<LinearModel> {
    match config.algorithm {
        Algorithm::Cw => LinearModel::with_covariance(dimension, config.initial_variance),
        _ => Ok(LinearModel::new(dimension)),
    }
}

/// One online round with the configured algorithm.
pub fn update<S: Structured + ?Sized>(
    model: &mut LinearModel,
    x: &S,
    config: &TrainConfig,
) -> Result<Vec<UpdateRecord>> {
    Ok(match config.algorithm {
        Algorithm::Perceptron => vec![perceptron_update(model, x)?],
        Algorithm::Pa => vec![pa_update(model, x, config.c)?],
        Algorithm::Cw => vec![cw_update(model, x, config.phi)?],
        Algorithm::NbestPa => nbest_pa_update(model, x, config.c, config.nbest_k)?,
    })
}

/// Trains from scratch, reporting per-epoch statistics to `observer`.
pub fn train_with_observer<S: Structured>(
    dataset: &[S],
    dimension: usize,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochStats),
) -> Result<LinearModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    for x in dataset {
        x.check_dimension(dimension)?;
    }
    let mut model = new_model(config, dimension)?;
    for epoch in 1..=config.epochs {
        let mut stats = EpochStats {
            epoch,
            mistakes: 0,
            total_loss: 0,
            units: 0,
        };
        for x in dataset {
            let records = update(&mut model, x, config)?;
            // The first record is always the model's own best prediction.
            let loss = records.first().map_or(0, |r| r.loss);
            stats.mistakes += usize::from(loss > 0);
            stats.total_loss += loss;
            stats.units += x.units();
        }
        observer(&stats);
    }
    if config.averaging {
        model.average();
    } else {
        model.avg_mu.clone_from(&model.mu);
    }
    Ok(model)
}

pub fn train_with_dimension<S: Structured>(
    dataset: &[S],
    dimension: usize,
    config: &TrainConfig,
) -> Result<LinearModel> {
    train_with_observer(dataset, dimension, config, |_| {})
}

/// Trains with the dimension inferred from the largest feature id in `dataset`.
pub fn train<S: Structured>(dataset: &[S], config: &TrainConfig) -> Result<LinearModel> {
    let dimension = dataset
        .iter()
        .filter_map(|x| x.max_feature_id())
        .max()
        .map_or(0, |id| id + 1);
    train_with_dimension(dataset, dimension, config)
}
