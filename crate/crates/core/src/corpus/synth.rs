//! Seeded synthetic corpora.
//!
//! Chains follow a Markov model over BIO entity labels. Each label owns a
//! vocabulary; with probability `noise` a word is instead drawn from a pool
//! shared by every label, so only context can disambiguate it. Trees are
//! maximum spanning arborescences of a random edge-score matrix built from
//! POS affinities, distance and noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{RawSentence, Token};
use crate::error::{Error, Result};
use crate::tree::{cle_decode, EdgeWeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    Chain,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Sentence lengths are uniform in `min_len..=max_len`.
    pub min_len: usize,
    pub max_len: usize,
    /// Entity categories (chains); the label set has `2·categories + 1` tags.
    pub categories: usize,
    /// Distinct words per label (chains) or per POS tag (trees).
    pub vocab: usize,
    /// POS tag count (trees).
    pub tags: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mode: SynthMode::Chain,
            train: 1000,
            dev: 200,
            test: 200,
            min_len: 5,
            max_len: 25,
            categories: 4,
            vocab: 50,
            tags: 8,
            noise: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "invalid sentence length range {}..={}",
                self.min_len, self.max_len
            )));
        }
        if self.categories == 0 || self.vocab == 0 || self.tags == 0 {
            return Err(Error::Config(
                "categories, vocab and tags must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

const CATEGORY_NAMES: [&str; 4] = ["PER", "LOC", "ORG", "MISC"];
const FUNCTION_TAGS: [&str; 5] = ["DT", "NN", "VB", "IN", "JJ"];

const STAY_OUTSIDE: f64 = 0.85;
const CONTINUE_ENTITY: f64 = 0.3;
const LEAVE_ENTITY: f64 = 0.6;

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    chars
        .next()
        .map(|c| c.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

/// The BIO Markov label model with per-label emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGenerator {
    labels: Vec<String>,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    vocab: usize,
    noise: f64,
    min_len: usize,
    max_len: usize,
}

impl ChainGenerator {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.categories;
        let category = |k: usize| {
            CATEGORY_NAMES
                .get(k)
                .map_or_else(|| format!("C{}", k + 1), |s| s.to_string())
        };
        let mut labels = vec!["O".to_owned()];
        for k in 0..c {
            labels.push(format!("B-{}", category(k)));
            labels.push(format!("I-{}", category(k)));
        }
        let l = labels.len();
        let mut outside = vec![0.0; l];
        outside[0] = STAY_OUTSIDE;
        for k in 0..c {
            outside[1 + 2 * k] = (1.0 - STAY_OUTSIDE) / c as f64;
        }
        let mut transitions = vec![outside.clone()];
        for k in 0..c {
            let mut row = vec![0.0; l];
            row[2 + 2 * k] = CONTINUE_ENTITY;
            row[0] = LEAVE_ENTITY;
            let switch = 1.0 - CONTINUE_ENTITY - LEAVE_ENTITY;
            if c == 1 {
                row[0] += switch;
            } else {
                for j in (0..c).filter(|&j| j != k) {
                    row[1 + 2 * j] = switch / (c - 1) as f64;
                }
            }
            // B-k and I-k leave the same way.
            transitions.push(row.clone());
            transitions.push(row);
        }
        Ok(Self {
            labels,
            initial: outside,
            transitions,
            vocab: cfg.vocab,
            noise: cfg.noise,
            min_len: cfg.min_len,
            max_len: cfg.max_len,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Distribution of the next label after `from`.
    pub fn transition(&self, from: usize) -> &[f64] {
        &self.transitions[from]
    }

    pub fn length_range(&self) -> (usize, usize) {
        (self.min_len, self.max_len)
    }

    /// Expected share of each label among all tokens.
    pub fn expected_label_frequencies(&self) -> Vec<f64> {
        let l = self.labels.len();
        let mut totals = vec![0.0; l];
        let mut tokens = 0.0;
        for n in self.min_len..=self.max_len {
            let mut dist = self.initial.clone();
            for _ in 0..n {
                for (t, d) in totals.iter_mut().zip(&dist) {
                    *t += d;
                }
                let mut next = vec![0.0; l];
                for (a, &pa) in dist.iter().enumerate() {
                    for (b, nb) in next.iter_mut().enumerate() {
                        *nb += pa * self.transitions[a][b];
                    }
                }
                dist = next;
            }
            tokens += n as f64;
        }
        totals.into_iter().map(|t| t / tokens).collect()
    }

    fn draw_label(rng: &mut ChaCha8Rng, dist: &[f64]) -> usize {
        let mut u: f64 = rng.random();
        for (y, &p) in dist.iter().enumerate() {
            if u < p {
                return y;
            }
            u -= p;
        }
        dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    fn emit(&self, rng: &mut ChaCha8Rng, label: usize) -> Token {
        let tag = self.labels[label].clone();
        let entity = label != 0;
        let i = rng.random_range(0..self.vocab);
        if rng.random_bool(self.noise) {
            let word = format!("amb{i}");
            let form = if rng.random_bool(0.5) {
                capitalize(&word)
            } else {
                word
            };
            let pos = if entity && rng.random_bool(0.7) {
                "NNP"
            } else {
                FUNCTION_TAGS[i % FUNCTION_TAGS.len()]
            };
            return Token::tagged(form, pos, tag);
        }
        if entity {
            let (prefix, category) = tag.split_at(2);
            let form = capitalize(&format!(
                "{}{}{i}",
                category.to_lowercase(),
                prefix[..1].to_lowercase()
            ));
            Token::tagged(form, "NNP", tag)
        } else {
            Token::tagged(format!("w{i}"), FUNCTION_TAGS[i % FUNCTION_TAGS.len()], tag)
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> RawSentence {
        let n = rng.random_range(self.min_len..=self.max_len);
        let mut tokens = Vec::with_capacity(n);
        let mut label = Self::draw_label(rng, &self.initial);
        for p in 0..n {
            if p > 0 {
                label = Self::draw_label(rng, &self.transitions[label]);
            }
            tokens.push(self.emit(rng, label));
        }
        RawSentence::new(tokens)
    }
}

/// Random POS affinities per direction plus a root row.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeGenerator {
    tags: Vec<String>,
    // [direction][head tag or root][dependent tag]
    affinity: [Vec<Vec<f64>>; 2],
    vocab: usize,
    noise: f64,
    min_len: usize,
    max_len: usize,
}

const DISTANCE_PENALTY: f64 = 1.0;
const NOISE_SCALE: f64 = 2.0;

impl TreeGenerator {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7265_6574);
        let t = cfg.tags;
        let mut table = || -> Vec<Vec<f64>> {
            (0..=t)
                .map(|_| {
                    (0..t)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        };
        let affinity = [table(), table()];
        Ok(Self {
            tags: (0..t).map(|i| format!("T{i}")).collect(),
            affinity,
            vocab: cfg.vocab,
            noise: cfg.noise,
            min_len: cfg.min_len,
            max_len: cfg.max_len,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<RawSentence> {
        let n = rng.random_range(self.min_len..=self.max_len);
        let tags: Vec<usize> = (0..n)
            .map(|_| rng.random_range(0..self.tags.len()))
            .collect();
        let root_row = self.tags.len();
        let mut w = EdgeWeightMatrix::forbidden(n);
        for h in 0..=n {
            for d in 1..=n {
                if h == d {
                    continue;
                }
                let (row, direction) = if h == 0 {
                    (root_row, 1)
                } else {
                    (tags[h - 1], usize::from(h < d))
                };
                let noise: f64 = rng.sample(StandardNormal);
                let distance = if h == 0 { 1.0 } else { h.abs_diff(d) as f64 };
                let score = self.affinity[direction][row][tags[d - 1]]
                    - DISTANCE_PENALTY * distance.ln()
                    + self.noise * NOISE_SCALE * noise;
                w.set(h, d, score);
            }
        }
        let tree = cle_decode(&w)?;
        let tokens = tags
            .iter()
            .zip(&tree.heads)
            .map(|(&t, &head)| {
                let word = format!(
                    "{}_{}",
                    self.tags[t].to_lowercase(),
                    rng.random_range(0..self.vocab)
                );
                Token::with_head(word, self.tags[t].clone(), head)
            })
            .collect();
        Ok(RawSentence::new(tokens))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<RawSentence>,
    pub dev: Vec<RawSentence>,
    pub test: Vec<RawSentence>,
}

/// Draws train, dev and test sentences, in that order, from one seeded stream.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Splits> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.train + cfg.dev + cfg.test;
    let sentences: Vec<RawSentence> = match cfg.mode {
        SynthMode::Chain => {
            let generator = ChainGenerator::new(cfg)?;
            (0..total).map(|_| generator.sample(&mut rng)).collect()
        }
        SynthMode::Tree => {
            let generator = TreeGenerator::new(cfg)?;
            (0..total)
                .map(|_| generator.sample(&mut rng))
                .collect::<Result<_>>()?
        }
    };
    let mut rest = sentences.into_iter();
    Ok(Splits {
        train: rest.by_ref().take(cfg.train).collect(),
        dev: rest.by_ref().take(cfg.dev).collect(),
        test: rest.collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_rows_are_distributions() {
        for c in 1..=5 {
            let g = ChainGenerator::new(&SynthConfig {
                categories: c,
                ..SynthConfig::default()
            })
            .unwrap();
            assert_eq!(g.labels().len(), 2 * c + 1);
            for a in 0..g.labels().len() {
                assert!((g.transition(a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let f = g.expected_label_frequencies();
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_tags_are_valid_bio() {
        let splits = generate_synthetic(&SynthConfig {
            train: 200,
            dev: 0,
            test: 0,
            ..SynthConfig::default()
        })
        .unwrap();
        for s in &splits.train {
            let mut tags: Vec<String> = s.tags().unwrap().into_iter().map(str::to_owned).collect();
            assert_eq!(crate::corpus::repair_bio(&mut tags), 0);
        }
    }

    #[test]
    fn tree_sentences_have_valid_heads() {
        let splits = generate_synthetic(&SynthConfig {
            mode: SynthMode::Tree,
            train: 20,
            dev: 5,
            test: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(splits.test.len(), 5);
        for s in splits.train.iter().chain(&splits.dev) {
            crate::tree::validate_heads(&s.heads().unwrap()).unwrap();
        }
    }

    #[test]
    fn rejects_bad_noise() {
        let cfg = SynthConfig {
            noise: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }
}
