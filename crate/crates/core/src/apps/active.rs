//! Pool-based active learning simulated with gold labels.
//!
//! Each round retrains from scratch on the labeled set, scores a random
//! sample of unlabeled sentences and moves the least confident ones into
//! the labeled set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::confidence::{sentence_confidence, ConfidenceConfig, ConfidenceEstimator};
use crate::error::{Error, Result};
use crate::instance::Structured;
use crate::learn::{train_with_dimension, TrainConfig};
use crate::model::LinearModel;

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// Uniformly random sentences.
    Random,
    /// Least confident sentences, scored by their minimum word confidence.
    Confidence(ConfidenceConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLearnConfig {
    pub initial_labeled: usize,
    pub candidate_sample: usize,
    pub batch: usize,
    pub eval_every_sentences: usize,
    pub stop_at: usize,
    pub selection: Selection,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ActiveLearnConfig {
    fn default() -> Self {
        Self {
            initial_labeled: 50,
            candidate_sample: 1000,
            batch: 10,
            eval_every_sentences: 100,
            stop_at: 5000,
            selection: Selection::Random,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl ActiveLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_labeled == 0 || self.batch == 0 || self.eval_every_sentences == 0 {
            return Err(Error::Config(
                "initial set, batch and evaluation interval must be positive".into(),
            ));
        }
        if self.batch > self.candidate_sample {
            return Err(Error::Config(format!(
                "batch {} exceeds candidate sample {}",
                self.batch, self.candidate_sample
            )));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub sentences: usize,
    pub words: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// The pool ran out before `stop_at` sentences were labeled.
    pub exhausted: bool,
}

impl LearningCurve {
    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// Labeled words at the first point whose metric reaches `target`.
    pub fn words_to_reach(&self, target: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.metric >= target)
            .map(|p| p.words)
    }
}

/// Fraction of labeled words saved by `curve` when reaching the final
/// metric of `baseline`. A curve that never gets there saves nothing.
pub fn effort_reduction(curve: &LearningCurve, baseline: &LearningCurve) -> Result<f64> {
    let target = baseline.last().ok_or(Error::Empty("baseline curve"))?;
    Ok(match curve.words_to_reach(target.metric) {
        Some(words) => 1.0 - words as f64 / target.words as f64,
        None => 0.0,
    })
}

/// Runs the protocol over `pool`. `evaluate` scores a trained model on
/// held-out data; its value is recorded every `eval_every_sentences`
/// labeled sentences and after the final round.
pub fn active_learning_run<S: Structured>(
    pool: &[S],
    dimension: usize,
    cfg: &ActiveLearnConfig,
    mut evaluate: impl FnMut(&LinearModel) -> Result<f64>,
) -> Result<LearningCurve> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("pool"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    let split = cfg.initial_labeled.min(pool.len());
    let mut labeled: Vec<usize> = order[..split].to_vec();
    let mut unlabeled: Vec<usize> = order[split..].to_vec();
    unlabeled.sort_unstable();

    let mut points = Vec::new();
    let mut next_eval = 0;
    let mut words: usize = labeled.iter().map(|&i| pool[i].units()).sum();
    loop {
        let train: Vec<&S> = labeled.iter().map(|&i| &pool[i]).collect();
        let model = train_with_dimension(&train, dimension, &cfg.train)?;
        let done = labeled.len() >= cfg.stop_at || unlabeled.is_empty();
        if labeled.len() >= next_eval || done {
            points.push(CurvePoint {
                sentences: labeled.len(),
                words,
                metric: evaluate(&model)?,
            });
            next_eval = (labeled.len() / cfg.eval_every_sentences + 1) * cfg.eval_every_sentences;
        }
        if done {
            return Ok(LearningCurve {
                points,
                exhausted: labeled.len() < cfg.stop_at,
            });
        }

        unlabeled.shuffle(&mut rng);
        let sample = cfg.candidate_sample.min(unlabeled.len());
        let take = cfg.batch.min(sample).min(cfg.stop_at - labeled.len());
        let chosen: Vec<usize> = match &cfg.selection {
            Selection::Random => (0..take).collect(),
            Selection::Confidence(conf) => {
                let mut estimator = ConfidenceEstimator::new(&model, conf)?;
                let mut scored = Vec::with_capacity(sample);
                for slot in 0..sample {
                    let i = unlabeled[slot];
                    let ann = estimator.annotate(&pool[i], i as u64)?;
                    scored.push((sentence_confidence(&ann)?, pool[i].units(), i, slot));
                }
                scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                scored.into_iter().take(take).map(|s| s.3).collect()
            }
        };
        let mut slots = chosen;
        slots.sort_unstable_by(|a, b| b.cmp(a));
        for slot in slots {
            let i = unlabeled.swap_remove(slot);
            words += pool[i].units();
            labeled.push(i);
        }
        unlabeled.sort_unstable();
    }
}
