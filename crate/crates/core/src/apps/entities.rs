//! BIO entity phrases and phrase-level precision, recall and F1.

use serde::Serialize;

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";

/// An entity phrase: tokens `start..end` of one category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Phrase {
    pub start: usize,
    pub end: usize,
    pub category: String,
}

/// Category of a `B-X` or `I-X` tag.
pub fn category(tag: &str) -> Option<&str> {
    tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-"))
}

pub fn is_entity(tag: &str) -> bool {
    category(tag).is_some()
}

/// Phrases of a tag sequence. An `I-X` that does not continue an `X`
/// phrase opens a new one, as `B-X` would.
pub fn phrases<S: AsRef<str>>(tags: &[S]) -> Vec<Phrase> {
    let mut out: Vec<Phrase> = Vec::new();
    let mut open: Option<Phrase> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let continues = match (&open, tag.strip_prefix("I-")) {
            (Some(p), Some(cat)) => p.category == cat,
            _ => false,
        };
        if continues {
            if let Some(p) = open.as_mut() {
                p.end = i + 1;
            }
            continue;
        }
        out.extend(open.take());
        if let Some(cat) = category(tag) {
            open = Some(Phrase {
                start: i,
                end: i + 1,
                category: cat.to_owned(),
            });
        }
    }
    out.extend(open);
    out
}

/// Maps every entity tag to category `NE`, keeping its `B-`/`I-` prefix.
pub fn merge_categories<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    tags.iter()
        .map(|t| {
            let t = t.as_ref();
            if t.starts_with("B-") {
                "B-NE".to_owned()
            } else if t.starts_with("I-") {
                "I-NE".to_owned()
            } else {
                t.to_owned()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl Prf {
    /// Precision is 1 when nothing is predicted; recall is 1 when there is
    /// nothing to find.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 {
            1.0
        } else {
            correct as f64 / predicted as f64
        };
        let recall = if gold == 0 {
            1.0
        } else {
            correct as f64 / gold as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            predicted,
            gold,
            correct,
        }
    }
}

/// Exact-match phrase precision, recall and F1 over a corpus.
pub fn entity_prf<G: AsRef<str>, P: AsRef<str>>(
    gold: &[Vec<G>],
    predicted: &[Vec<P>],
) -> Result<Prf> {
    if gold.len() != predicted.len() {
        return Err(Error::ShapeMismatch {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    let (mut correct, mut n_pred, mut n_gold) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        if g.len() != p.len() {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                actual: p.len(),
            });
        }
        let gp = phrases(g);
        let pp = phrases(p);
        n_gold += gp.len();
        n_pred += pp.len();
        correct += pp.iter().filter(|x| gp.contains(x)).count();
    }
    Ok(Prf::from_counts(correct, n_pred, n_gold))
}
