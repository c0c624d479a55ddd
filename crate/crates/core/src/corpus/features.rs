//! Feature templates and the string-to-id index.
//!
//! Chain features are observation strings conjoined with the label; their
//! ids follow the `L × L` transition block. Tree features are edge strings
//! used as-is.

use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::RawSentence;
use crate::error::{Error, Result};
use crate::instance::{ChainInstance, Transitions, TreeInstance};
use crate::sparse::SparseVector;

/// Padding form and POS before the first token.
pub const BOS: &str = "<s>";
/// Padding form and POS after the last token.
pub const EOS: &str = "</s>";
/// Form and POS of the artificial root token.
pub const ROOT: &str = "<root>";

/// Interned feature strings with dense ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureIndex {
    names: IndexSet<String>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// A frozen index over `names`, ids in iteration order.
    pub fn from_names(names: impl IntoIterator<Item = String>) -> Self {
        Self {
            names: names.into_iter().collect(),
            frozen: true,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.names.get_index_of(name)
    }

    /// The id of `name`, adding it unless the index is frozen.
    pub fn intern(&mut self, name: &str) -> Option<usize> {
        if let Some(id) = self.names.get_index_of(name) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        Some(self.names.insert_full(name.to_owned()).0)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get_index(id).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTemplates {
    /// Words and tags within this distance of the current position.
    pub window: usize,
    pub words: bool,
    pub pos: bool,
    /// Prefixes and suffixes of length 2 to 4.
    pub affixes: bool,
    /// Capitalized, all caps, contains a digit, contains a hyphen.
    pub orthographic: bool,
    pub bias: bool,
}

impl Default for ChainTemplates {
    fn default() -> Self {
        Self {
            window: 2,
            words: true,
            pos: true,
            affixes: true,
            orthographic: true,
            bias: true,
        }
    }
}

impl ChainTemplates {
    /// Identity of the current word only.
    pub fn word_identity() -> Self {
        Self {
            window: 0,
            words: true,
            pos: false,
            affixes: false,
            orthographic: false,
            bias: false,
        }
    }

    /// Observation strings for every position.
    pub fn observations(&self, sentence: &RawSentence) -> Vec<Vec<String>> {
        let tokens = &sentence.tokens;
        let n = tokens.len() as isize;
        let at = |i: isize, word: bool| -> &str {
            if i < 0 {
                BOS
            } else if i >= n {
                EOS
            } else if word {
                &tokens[i as usize].form
            } else {
                &tokens[i as usize].pos
            }
        };
        let w = self.window as isize;
        (0..n)
            .map(|p| {
                let mut out = Vec::new();
                if self.bias {
                    out.push("bias".to_owned());
                }
                for off in -w..=w {
                    if self.words {
                        out.push(format!("w[{off}]={}", at(p + off, true)));
                    }
                    if self.pos {
                        out.push(format!("p[{off}]={}", at(p + off, false)));
                    }
                }
                let form = &tokens[p as usize].form;
                if self.affixes {
                    let chars: Vec<char> = form.chars().collect();
                    for k in 2..=4.min(chars.len()) {
                        out.push(format!("pre{k}={}", chars[..k].iter().collect::<String>()));
                        out.push(format!(
                            "suf{k}={}",
                            chars[chars.len() - k..].iter().collect::<String>()
                        ));
                    }
                }
                if self.orthographic {
                    if form.chars().next().is_some_and(char::is_uppercase) {
                        out.push("cap".to_owned());
                    }
                    if form.chars().any(char::is_alphabetic)
                        && form
                            .chars()
                            .filter(|c| c.is_alphabetic())
                            .all(char::is_uppercase)
                    {
                        out.push("allcaps".to_owned());
                    }
                    if form.chars().any(|c| c.is_ascii_digit()) {
                        out.push("digit".to_owned());
                    }
                    if form.contains('-') {
                        out.push("hyphen".to_owned());
                    }
                }
                out
            })
            .collect()
    }
}

/// Turns tagged sentences into chain instances over a fixed label set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFeaturizer {
    templates: ChainTemplates,
    labels: IndexSet<String>,
    index: FeatureIndex,
    transitions: Arc<Vec<SparseVector>>,
}

impl ChainFeaturizer {
    pub fn new(
        templates: ChainTemplates,
        labels: impl IntoIterator<Item = String>,
        index: FeatureIndex,
    ) -> Result<Self> {
        let labels: IndexSet<String> = labels.into_iter().collect();
        if labels.is_empty() {
            return Err(Error::Empty("label set"));
        }
        let l = labels.len();
        let transitions = Arc::new(
            (0..l * l)
                .map(|id| SparseVector::indicators([id]))
                .collect(),
        );
        Ok(Self {
            templates,
            labels,
            index,
            transitions,
        })
    }

    /// A featurizer whose labels are the sorted tags of `corpus`, with an
    /// empty, unfrozen index.
    pub fn from_corpus(templates: ChainTemplates, corpus: &[RawSentence]) -> Result<Self> {
        let mut tags: Vec<String> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter().filter_map(|t| t.tag.clone()))
            .collect();
        tags.sort();
        tags.dedup();
        Self::new(templates, tags, FeatureIndex::new())
    }

    pub fn templates(&self) -> &ChainTemplates {
        &self.templates
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label_id(&self, tag: &str) -> Option<usize> {
        self.labels.get_index_of(tag)
    }

    pub fn label_name(&self, id: usize) -> Option<&str> {
        self.labels.get_index(id).map(String::as_str)
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn freeze(&mut self) {
        self.index.freeze();
    }

    /// First node feature id; transitions occupy the ids below it.
    pub fn node_offset(&self) -> usize {
        self.labels.len() * self.labels.len()
    }

    pub fn dimension(&self) -> usize {
        self.node_offset() + self.index.len() * self.labels.len()
    }

    /// Builds an instance, interning new observations unless the index is
    /// frozen. Untagged sentences get label 0 as a placeholder gold.
    pub fn extract(&mut self, sentence: &RawSentence) -> Result<ChainInstance> {
        let gold = sentence
            .tokens
            .iter()
            .map(|t| match &t.tag {
                None => Ok(0),
                Some(tag) => self
                    .label_id(tag)
                    .ok_or_else(|| Error::InvalidInstance(format!("unknown tag `{tag}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let observations = self
            .templates
            .observations(sentence)
            .into_iter()
            .map(|row| row.iter().filter_map(|s| self.index.intern(s)).collect())
            .collect();
        ChainInstance::conjoined(
            self.labels.len(),
            self.node_offset(),
            observations,
            Transitions::Shared(Arc::clone(&self.transitions)),
            gold,
        )
    }

    pub fn extract_all(&mut self, corpus: &[RawSentence]) -> Result<Vec<ChainInstance>> {
        corpus.iter().map(|s| self.extract(s)).collect()
    }

    pub fn label_names(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&y| self.label_name(y).unwrap_or("?").to_owned())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTemplates {
    pub words: bool,
    pub pos: bool,
    /// Tags of the words between head and dependent.
    pub between: bool,
    /// Tags next to the head and the dependent.
    pub context: bool,
    /// Conjoin every feature with the edge direction and distance bucket.
    pub distance: bool,
}

impl Default for TreeTemplates {
    fn default() -> Self {
        Self {
            words: true,
            pos: true,
            between: true,
            context: true,
            distance: true,
        }
    }
}

fn distance_bucket(distance: usize) -> &'static str {
    match distance {
        1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5..=9 => "5-9",
        _ => "10+",
    }
}

impl TreeTemplates {
    /// Feature strings of the edge `head → dep` (0 is the root).
    pub fn edge_strings(&self, sentence: &RawSentence, head: usize, dep: usize) -> Vec<String> {
        let tokens = &sentence.tokens;
        let n = tokens.len();
        let form = |i: usize| {
            if i == 0 {
                ROOT
            } else {
                tokens[i - 1].form.as_str()
            }
        };
        let tag = |i: isize| -> &str {
            if i == 0 {
                ROOT
            } else if i < 0 {
                BOS
            } else if i as usize > n {
                EOS
            } else {
                &tokens[i as usize - 1].pos
            }
        };
        let (hw, dw) = (form(head), form(dep));
        let (h, d) = (head as isize, dep as isize);
        let (hp, dp) = (tag(h), tag(d));
        let mut base = Vec::new();
        if self.words {
            base.push(format!("hw={hw}"));
            base.push(format!("dw={dw}"));
            base.push(format!("hw,dw={hw},{dw}"));
        }
        if self.pos {
            base.push(format!("hp={hp}"));
            base.push(format!("dp={dp}"));
            base.push(format!("hp,dp={hp},{dp}"));
        }
        if self.words && self.pos {
            base.push(format!("hw,hp={hw},{hp}"));
            base.push(format!("dw,dp={dw},{dp}"));
            base.push(format!("hw,hp,dp={hw},{hp},{dp}"));
            base.push(format!("hp,dw,dp={hp},{dw},{dp}"));
            base.push(format!("hw,hp,dw,dp={hw},{hp},{dw},{dp}"));
        }
        if self.pos && self.between {
            let (lo, hi) = (head.min(dep), head.max(dep));
            let mut seen: Vec<&str> = (lo + 1..hi).map(|i| tag(i as isize)).collect();
            seen.sort_unstable();
            seen.dedup();
            for bp in seen {
                base.push(format!("hp,bp,dp={hp},{bp},{dp}"));
            }
        }
        if self.pos && self.context {
            let (hn, hb, dn, db) = (tag(h + 1), tag(h - 1), tag(d + 1), tag(d - 1));
            base.push(format!("hp,h+1,d-1,dp={hp},{hn},{db},{dp}"));
            base.push(format!("h-1,hp,d-1,dp={hb},{hp},{db},{dp}"));
            base.push(format!("hp,h+1,dp,d+1={hp},{hn},{dp},{dn}"));
            base.push(format!("h-1,hp,dp,d+1={hb},{hp},{dp},{dn}"));
        }
        if self.distance {
            let direction = if head < dep { 'R' } else { 'L' };
            let bucket = distance_bucket(head.abs_diff(dep));
            let suffix = format!("&{direction}{bucket}");
            let conjoined: Vec<String> = base.iter().map(|f| format!("{f}{suffix}")).collect();
            base.push(format!("dir,dist{suffix}"));
            base.extend(conjoined);
        }
        base
    }
}

/// Turns sentences with heads into tree instances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeFeaturizer {
    templates: TreeTemplates,
    index: FeatureIndex,
}

impl TreeFeaturizer {
    pub fn new(templates: TreeTemplates, index: FeatureIndex) -> Self {
        Self { templates, index }
    }

    pub fn templates(&self) -> &TreeTemplates {
        &self.templates
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn freeze(&mut self) {
        self.index.freeze();
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    /// Builds an instance, interning new edge features unless the index is
    /// frozen. Sentences without heads get a placeholder gold chain
    /// (word 1 under the root, every other word under word 1).
    pub fn extract(&mut self, sentence: &RawSentence) -> Result<TreeInstance> {
        let n = sentence.len();
        let gold = sentence
            .heads()
            .unwrap_or_else(|| (0..n).map(|i| usize::from(i > 0)).collect());
        let templates = self.templates;
        let index = &mut self.index;
        TreeInstance::new(
            n,
            |h, d| {
                SparseVector::indicators(
                    templates
                        .edge_strings(sentence, h, d)
                        .iter()
                        .filter_map(|s| index.intern(s)),
                )
            },
            gold,
        )
    }

    pub fn extract_all(&mut self, corpus: &[RawSentence]) -> Result<Vec<TreeInstance>> {
        corpus.iter().map(|s| self.extract(s)).collect()
    }
}
