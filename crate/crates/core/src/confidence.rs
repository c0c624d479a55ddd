//! Per-unit confidence estimators.
//!
//! A unit is a word: its predicted label for chains, its predicted head for
//! trees. Absolute methods produce `ν ∈ [0, 1]`; [`Method::Delta`] produces
//! the raw margin `δ ≥ 0`, with `+∞` marking units that have no feasible
//! alternative value.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Structured;
use crate::model::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Delta,
    Gamma,
    Kb,
    Wkb,
    KdFix,
    KdPc,
    KdFixDelta,
    /// Uniform noise, the reference point for ranking quality.
    Random,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Delta,
        Method::Gamma,
        Method::Kb,
        Method::Wkb,
        Method::KdFix,
        Method::KdPc,
        Method::KdFixDelta,
        Method::Random,
    ];

    /// Whether scores live in `[0, 1]` and can be calibrated.
    pub fn is_absolute(self) -> bool {
        self != Method::Delta
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Delta => "delta",
            Method::Gamma => "gamma",
            Method::Kb => "kb",
            Method::Wkb => "wkb",
            Method::KdFix => "kd-fix",
            Method::KdPc => "kd-pc",
            Method::KdFixDelta => "kd-fix-delta",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == normalized)
            .or(match normalized.as_str() {
                "kd-fix+delta" | "combo" => Some(Method::KdFixDelta),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown confidence method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    pub method: Method,
    /// Number of alternatives for the K-best and sampling methods.
    pub k: usize,
    /// Covariance scale for sampled weight vectors.
    pub s: f64,
    /// Temperature for marginal probabilities.
    pub c: f64,
    /// Weight of the sampling score in the combined method.
    pub combo_weight: f64,
    pub seed: u64,
    /// Score with the averaged mean.
    pub averaged: bool,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            method: Method::KdFix,
            k: 50,
            s: 0.1,
            c: 1.0,
            combo_weight: 0.99,
            seed: 0,
            averaged: true,
        }
    }
}

impl ConfidenceConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let uses_k = matches!(
            self.method,
            Method::Kb | Method::Wkb | Method::KdFix | Method::KdPc | Method::KdFixDelta
        );
        if uses_k && self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        let samples = matches!(
            self.method,
            Method::KdFix | Method::KdPc | Method::KdFixDelta
        );
        if samples && !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::Config(format!("s must be positive, got {}", self.s)));
        }
        if self.method == Method::Gamma && !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if self.method == Method::KdFixDelta
            && !(self.combo_weight > 0.0 && self.combo_weight < 1.0)
        {
            return Err(Error::Config(format!(
                "combination weight must lie in (0, 1), got {}",
                self.combo_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceAnnotation {
    pub unit: usize,
    pub predicted: usize,
    pub nu: f64,
    pub is_correct: Option<bool>,
}

/// Alternative outputs with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeSet {
    pub outputs: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl AlternativeSet {
    pub fn uniform(outputs: Vec<Vec<usize>>) -> Self {
        let weights = vec![1.0; outputs.len()];
        Self { outputs, weights }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Margin of every unit: the score of `predicted` minus the best score with
/// that unit's value forbidden. Returns the prediction with the margins.
pub fn conf_delta<S: Structured + ?Sized>(
    x: &S,
    weights: &[f64],
) -> Result<(Vec<usize>, Vec<f64>)> {
    x.check_dimension(weights.len())?;
    let (predicted, best) = x.decode(weights)?;
    let margins = x
        .forbidden_scores(weights, &predicted)?
        .into_iter()
        .map(|alt| alt.map_or(f64::INFINITY, |score| (best - score).max(0.0)))
        .collect();
    Ok((predicted, margins))
}

/// Marginal probability of each Viterbi label under temperature `c`.
pub fn conf_gamma<S: Structured + ?Sized>(
    x: &S,
    weights: &[f64],
    c: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    x.check_dimension(weights.len())?;
    let (predicted, _) = x.decode(weights)?;
    let nu = x.unit_marginals(weights, &predicted, c)?;
    Ok((predicted, nu))
}

/// The `k` best outputs under `weights`, uniformly weighted or weighted by
/// their scores clipped at zero.
pub fn build_alternatives_kbest<S: Structured + ?Sized>(
    x: &S,
    weights: &[f64],
    k: usize,
    weighted: bool,
) -> Result<AlternativeSet> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    x.check_dimension(weights.len())?;
    let best = x.kbest(weights, k)?;
    let weights = best
        .iter()
        .map(|(_, score)| if weighted { score.max(0.0) } else { 1.0 })
        .collect();
    Ok(AlternativeSet {
        outputs: best.into_iter().map(|(z, _)| z).collect(),
        weights,
    })
}

/// Covariance of the sampling distribution around the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// `s·I`
    Fixed,
    /// `s·Σ` with the learner's diagonal covariance.
    PerCoordinate,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one draw; depends only on its coordinates, not on evaluation order.
pub fn draw_seed(seed: u64, instance: u64, draw: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ instance) ^ draw)
}

/// Draws weight vectors around a mean and decodes with them.
///
/// Only coordinates an instance can touch are perturbed; the rest of the
/// scratch vector keeps the mean, which leaves every decode unchanged.
pub struct WeightSampler<'m> {
    mean: &'m [f64],
    sigma: Option<&'m [f64]>,
    scale: f64,
    scratch: Vec<f64>,
}

impl<'m> WeightSampler<'m> {
    pub fn new(
        model: &'m LinearModel,
        averaged: bool,
        scale: f64,
        mode: SamplingMode,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("s must be positive, got {scale}")));
        }
        let sigma = match mode {
            SamplingMode::Fixed => None,
            SamplingMode::PerCoordinate => Some(model.sigma_diag.as_deref().ok_or_else(|| {
                Error::Config("per-coordinate sampling requires a covariance diagonal".into())
            })?),
        };
        let mean = model.prediction_weights(averaged);
        Ok(Self {
            mean,
            sigma,
            scale,
            scratch: mean.to_vec(),
        })
    }

    pub fn alternatives<S: Structured + ?Sized>(
        &mut self,
        x: &S,
        k: usize,
        seed: u64,
        instance: u64,
    ) -> Result<AlternativeSet> {
        if k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        x.check_dimension(self.mean.len())?;
        let support = x.feature_support();
        let std_devs: Vec<f64> = support
            .iter()
            .map(|&id| (self.scale * self.sigma.map_or(1.0, |s| s[id])).sqrt())
            .collect();
        let mut outputs = Vec::with_capacity(k);
        let mut result = Ok(());
        for draw in 0..k {
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(seed, instance, draw as u64));
            for (&id, &sd) in support.iter().zip(&std_devs) {
                let z: f64 = rng.sample(StandardNormal);
                self.scratch[id] = self.mean[id] + sd * z;
            }
            match x.decode(&self.scratch) {
                Ok((z, _)) => outputs.push(z),
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        for &id in &support {
            self.scratch[id] = self.mean[id];
        }
        result.map(|()| AlternativeSet::uniform(outputs))
    }
}

/// `k` outputs decoded with weight vectors drawn from `N(μ, s·I)` or
/// `N(μ, s·Σ)`; draw `i` of instance `instance` is seeded from
/// `(seed, instance, i)`.
#[allow(clippy::too_many_arguments)]
pub fn build_alternatives_sampled<S: Structured + ?Sized>(
    x: &S,
    model: &LinearModel,
    averaged: bool,
    k: usize,
    s: f64,
    mode: SamplingMode,
    seed: u64,
    instance: u64,
) -> Result<AlternativeSet> {
    WeightSampler::new(model, averaged, s, mode)?.alternatives(x, k, seed, instance)
}

/// Weighted fraction of alternatives that agree with `predicted` at each unit.
pub fn agreement_confidence(alts: &AlternativeSet, predicted: &[usize]) -> Result<Vec<f64>> {
    let total: f64 = alts.weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mut agree = vec![0.0; predicted.len()];
    for (z, &w) in alts.outputs.iter().zip(&alts.weights) {
        if z.len() != predicted.len() {
            return Err(Error::ShapeMismatch {
                expected: predicted.len(),
                actual: z.len(),
            });
        }
        for (acc, (a, b)) in agree.iter_mut().zip(z.iter().zip(predicted)) {
            if a == b {
                *acc += w;
            }
        }
    }
    Ok(agree.into_iter().map(|a| (a / total).min(1.0)).collect())
}

/// Maps values to `rank / (n + 1)` in ascending order; equal values share
/// the rank of their first occurrence.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut rank = 0;
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 || values[order[pos - 1]] != values[i] {
            rank = pos + 1;
        }
        out[i] = rank as f64 / (n + 1) as f64;
    }
    out
}

/// `a·ν + (1 − a)·rank(δ)`, with margins rank-normalized across the batch.
pub fn mix_scores(kd: &[f64], delta: &[f64], a: f64) -> Vec<f64> {
    rank_normalize(delta)
        .into_iter()
        .zip(kd)
        .map(|(r, &nu)| a * nu + (1.0 - a) * r)
        .collect()
}

/// Sampling confidence refined by the margin, for a single instance.
pub fn conf_combo<S: Structured>(
    x: &S,
    model: &LinearModel,
    cfg: &ConfidenceConfig,
) -> Result<Vec<f64>> {
    let cfg = ConfidenceConfig {
        method: Method::KdFixDelta,
        ..cfg.clone()
    };
    let mut estimator = ConfidenceEstimator::new(model, &cfg)?;
    Ok(estimator
        .annotate(x, 0)?
        .into_iter()
        .map(|a| a.nu)
        .collect())
}

/// Minimum unit confidence of a sentence.
pub fn sentence_confidence(annotations: &[ConfidenceAnnotation]) -> Result<f64> {
    annotations
        .iter()
        .map(|a| a.nu)
        .reduce(f64::min)
        .ok_or(Error::Empty("annotation list"))
}

/// Runs one configured method over instances, reusing sampling buffers.
pub struct ConfidenceEstimator<'m> {
    model: &'m LinearModel,
    cfg: ConfidenceConfig,
    sampler: Option<WeightSampler<'m>>,
}

impl<'m> ConfidenceEstimator<'m> {
    pub fn new(model: &'m LinearModel, cfg: &ConfidenceConfig) -> Result<Self> {
        cfg.validate()?;
        let sampler = match cfg.method {
            Method::KdFix | Method::KdFixDelta => Some(WeightSampler::new(
                model,
                cfg.averaged,
                cfg.s,
                SamplingMode::Fixed,
            )?),
            Method::KdPc => Some(WeightSampler::new(
                model,
                cfg.averaged,
                cfg.s,
                SamplingMode::PerCoordinate,
            )?),
            _ => None,
        };
        Ok(Self {
            model,
            cfg: cfg.clone(),
            sampler,
        })
    }

    fn weights(&self) -> &'m [f64] {
        self.model.prediction_weights(self.cfg.averaged)
    }

    fn sampled(&mut self, x: &impl Structured, instance: u64) -> Result<(Vec<usize>, Vec<f64>)> {
        let weights = self.weights();
        x.check_dimension(weights.len())?;
        let (predicted, _) = x.decode(weights)?;
        let sampler = self
            .sampler
            .as_mut()
            .expect("sampling methods own a sampler");
        let alts = sampler.alternatives(x, self.cfg.k, self.cfg.seed, instance)?;
        let nu = agreement_confidence(&alts, &predicted)?;
        Ok((predicted, nu))
    }

    /// Prediction and raw per-unit scores for one instance; `instance` is its
    /// position in the evaluated collection and keys the random draws.
    /// The combined method returns unmixed sampling scores here.
    fn raw_scores(&mut self, x: &impl Structured, instance: u64) -> Result<(Vec<usize>, Vec<f64>)> {
        let weights = self.weights();
        match self.cfg.method {
            Method::Delta => conf_delta(x, weights),
            Method::Gamma => conf_gamma(x, weights, self.cfg.c),
            Method::Kb | Method::Wkb => {
                x.check_dimension(weights.len())?;
                let (predicted, _) = x.decode(weights)?;
                let mut alts = build_alternatives_kbest(
                    x,
                    weights,
                    self.cfg.k,
                    self.cfg.method == Method::Wkb,
                )?;
                if alts.weights.iter().all(|&w| w == 0.0) {
                    // No alternative scores above zero: fall back to uniform weights.
                    log::debug!("instance {instance}: all alternative scores are non-positive");
                    alts.weights.fill(1.0);
                }
                Ok((predicted.clone(), agreement_confidence(&alts, &predicted)?))
            }
            Method::KdFix | Method::KdPc | Method::KdFixDelta => self.sampled(x, instance),
            Method::Random => {
                x.check_dimension(weights.len())?;
                let (predicted, _) = x.decode(weights)?;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(draw_seed(self.cfg.seed, instance, u64::MAX));
                let nu = (0..predicted.len()).map(|_| rng.random::<f64>()).collect();
                Ok((predicted, nu))
            }
        }
    }

    fn annotations(
        x: &impl Structured,
        predicted: Vec<usize>,
        nu: Vec<f64>,
    ) -> Vec<ConfidenceAnnotation> {
        let gold = x.gold();
        predicted
            .into_iter()
            .zip(nu)
            .enumerate()
            .map(|(unit, (predicted, nu))| ConfidenceAnnotation {
                unit,
                predicted,
                nu,
                is_correct: gold.get(unit).map(|&g| g == predicted),
            })
            .collect()
    }

    /// Annotates a single instance. The combined method normalizes margins
    /// within this instance only.
    pub fn annotate(
        &mut self,
        x: &impl Structured,
        instance: u64,
    ) -> Result<Vec<ConfidenceAnnotation>> {
        if self.cfg.method == Method::KdFixDelta {
            let (predicted, kd) = self.sampled(x, instance)?;
            let (_, delta) = conf_delta(x, self.weights())?;
            let nu = mix_scores(&kd, &delta, self.cfg.combo_weight);
            return Ok(Self::annotations(x, predicted, nu));
        }
        let (predicted, nu) = self.raw_scores(x, instance)?;
        Ok(Self::annotations(x, predicted, nu))
    }

    /// Annotates every instance, keyed by its index. The combined method
    /// normalizes margins across the whole batch.
    pub fn annotate_batch<S: Structured>(
        &mut self,
        xs: &[S],
    ) -> Result<Vec<Vec<ConfidenceAnnotation>>> {
        if self.cfg.method != Method::KdFixDelta {
            return xs
                .iter()
                .enumerate()
                .map(|(i, x)| self.annotate(x, i as u64))
                .collect();
        }
        let mut predictions = Vec::with_capacity(xs.len());
        let mut kd_all = Vec::new();
        let mut delta_all = Vec::new();
        for (i, x) in xs.iter().enumerate() {
            let (predicted, kd) = self.sampled(x, i as u64)?;
            let (_, delta) = conf_delta(x, self.weights())?;
            kd_all.extend(kd);
            delta_all.extend(delta);
            predictions.push(predicted);
        }
        let mut mixed = mix_scores(&kd_all, &delta_all, self.cfg.combo_weight).into_iter();
        Ok(xs
            .iter()
            .zip(predictions)
            .map(|(x, predicted)| {
                let nu: Vec<f64> = mixed.by_ref().take(predicted.len()).collect();
                Self::annotations(x, predicted, nu)
            })
            .collect())
    }
}

/// Annotates a collection with one configured method.
pub fn annotate_batch<S: Structured>(
    xs: &[S],
    model: &LinearModel,
    cfg: &ConfidenceConfig,
) -> Result<Vec<Vec<ConfidenceAnnotation>>> {
    ConfidenceEstimator::new(model, cfg)?.annotate_batch(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agreement_examples() {
        let alts = AlternativeSet::uniform(vec![vec![0], vec![0], vec![0], vec![1], vec![2]]);
        assert_eq!(agreement_confidence(&alts, &[0]).unwrap(), vec![0.6]);
        let all = AlternativeSet::uniform(vec![vec![4]; 5]);
        assert_eq!(agreement_confidence(&all, &[4]).unwrap(), vec![1.0]);
        let weighted = AlternativeSet {
            outputs: vec![vec![1], vec![1], vec![0]],
            weights: vec![2.0, 1.0, 1.0],
        };
        assert_eq!(agreement_confidence(&weighted, &[1]).unwrap(), vec![0.75]);
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let alts = AlternativeSet {
            outputs: vec![vec![0]],
            weights: vec![0.0],
        };
        assert!(matches!(
            agreement_confidence(&alts, &[0]),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn sentence_minimum() {
        let ann = |nus: &[f64]| -> Vec<ConfidenceAnnotation> {
            nus.iter()
                .enumerate()
                .map(|(unit, &nu)| ConfidenceAnnotation {
                    unit,
                    predicted: 0,
                    nu,
                    is_correct: None,
                })
                .collect()
        };
        assert_eq!(sentence_confidence(&ann(&[1.0, 0.4, 0.9])).unwrap(), 0.4);
        assert_eq!(sentence_confidence(&ann(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(sentence_confidence(&ann(&[0.3])).unwrap(), 0.3);
        assert!(sentence_confidence(&[]).is_err());
    }

    #[test]
    fn ranks_share_ties_and_stay_inside_unit_interval() {
        let r = rank_normalize(&[3.0, 1.0, 3.0, f64::INFINITY]);
        assert_eq!(r, vec![0.4, 0.2, 0.4, 0.8]);
    }

    #[test]
    fn combo_dominance_and_tie_refinement() {
        let mixed = mix_scores(&[0.9, 0.5], &[0.1, 7.0], 0.99);
        assert!(mixed[0] > mixed[1]);
        let mixed = mix_scores(&[0.5, 0.5], &[0.1, 7.0], 0.99);
        assert!(mixed[0] < mixed[1]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(
            "kd_fix+delta".parse::<Method>().unwrap(),
            Method::KdFixDelta
        );
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn draw_seeds_differ_by_coordinate() {
        let a = draw_seed(1, 2, 3);
        assert_ne!(a, draw_seed(1, 3, 2));
        assert_ne!(a, draw_seed(2, 2, 3));
        assert_eq!(a, draw_seed(1, 2, 3));
    }
}
