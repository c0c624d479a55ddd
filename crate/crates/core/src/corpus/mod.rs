//! Corpora: CoNLL readers and writers, feature extraction and a seeded
//! synthetic generator.

mod conll;
mod features;
mod synth;

pub use conll::{
    parse_conll_chain, parse_conll_dependency, read_conll_chain, read_conll_dependency,
    write_conll_chain, write_conll_dependency, ChainColumns, TagColumn,
};
pub use features::{
    ChainFeaturizer, ChainTemplates, FeatureIndex, TreeFeaturizer, TreeTemplates, BOS, EOS, ROOT,
};
pub use synth::{
    generate_synthetic, ChainGenerator, Splits, SynthConfig, SynthMode, TreeGenerator,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub pos: String,
    /// Chunk or entity tag in BIO notation.
    pub tag: Option<String>,
    /// 1-based head index, 0 for the root.
    pub head: Option<usize>,
    pub relation: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>, pos: impl Into<String>) -> Self {
        Self {
            form: form.into(),
            pos: pos.into(),
            tag: None,
            head: None,
            relation: None,
        }
    }

    pub fn tagged(form: impl Into<String>, pos: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            tag: Some(tag.into()),
            ..Self::new(form, pos)
        }
    }

    pub fn with_head(form: impl Into<String>, pos: impl Into<String>, head: usize) -> Self {
        Self {
            head: Some(head),
            ..Self::new(form, pos)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub tokens: Vec<Token>,
}

impl RawSentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tags(&self) -> Option<Vec<&str>> {
        self.tokens.iter().map(|t| t.tag.as_deref()).collect()
    }

    pub fn heads(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.head).collect()
    }
}

/// Rewrites `I-X` tags that do not continue an `X` phrase as `B-X`.
/// Returns the number of repaired tags.
pub fn repair_bio(tags: &mut [String]) -> usize {
    let mut repaired = 0;
    for i in 0..tags.len() {
        if let Some(category) = tags[i].strip_prefix("I-") {
            let continues = i > 0
                && (tags[i - 1].strip_prefix("B-") == Some(category)
                    || tags[i - 1].strip_prefix("I-") == Some(category));
            if !continues {
                tags[i] = format!("B-{category}");
                repaired += 1;
            }
        }
    }
    repaired
}
