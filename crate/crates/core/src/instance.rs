//! Factored training and test instances.
//!
//! Both instance kinds expose the same view through [`Structured`]: an
//! output is a `Vec<usize>` with one entry per unit (a label per word for
//! chains, a head per dependent for trees), and the joint feature vector of
//! an output is the sum of its factors' feature bundles.

use std::sync::Arc;

use crate::chain::{self, MaxMarginals, PotentialTable};
use crate::error::{Error, Result};
use crate::sparse::{SparseAccumulator, SparseVector};
use crate::tree::{self, EdgeWeightMatrix, HeadConstraint};

pub trait Structured {
    /// Number of scored units (words).
    fn units(&self) -> usize;

    fn gold(&self) -> &[usize];

    /// Largest feature id referenced by any factor.
    fn max_feature_id(&self) -> Option<usize>;

    /// Sorted, de-duplicated ids of every feature any output could use.
    fn feature_support(&self) -> Vec<usize>;

    /// Checks that `output` is admissible for this instance.
    fn validate_output(&self, output: &[usize]) -> Result<()>;

    /// `Φ(x, output)`.
    fn joint_features(&self, output: &[usize]) -> SparseVector;

    /// `Φ(x, gold) − Φ(x, predicted)`; empty when the outputs agree.
    fn feature_difference(&self, gold: &[usize], predicted: &[usize]) -> SparseVector {
        self.joint_features(gold)
            .sub(&self.joint_features(predicted))
    }

    fn decode(&self, weights: &[f64]) -> Result<(Vec<usize>, f64)>;

    fn kbest(&self, weights: &[f64], k: usize) -> Result<Vec<(Vec<usize>, f64)>>;

    /// For every unit, the best score of an output that changes that unit's
    /// value from `predicted`; `None` when no such output exists.
    fn forbidden_scores(&self, weights: &[f64], predicted: &[usize]) -> Result<Vec<Option<f64>>>;

    /// Marginal probability of each unit's `predicted` value under the
    /// log-linear distribution with temperature `c`.
    fn unit_marginals(&self, _weights: &[f64], _predicted: &[usize], _c: f64) -> Result<Vec<f64>> {
        Err(Error::UnsupportedMethod("gamma".into()))
    }

    fn check_dimension(&self, dimension: usize) -> Result<()> {
        match self.max_feature_id() {
            Some(id) if id >= dimension => Err(Error::Dimension { id, dimension }),
            _ => Ok(()),
        }
    }
}

impl<S: Structured + ?Sized> Structured for &S {
    fn units(&self) -> usize {
        (**self).units()
    }

    fn gold(&self) -> &[usize] {
        (**self).gold()
    }

    fn max_feature_id(&self) -> Option<usize> {
        (**self).max_feature_id()
    }

    fn feature_support(&self) -> Vec<usize> {
        (**self).feature_support()
    }

    fn validate_output(&self, output: &[usize]) -> Result<()> {
        (**self).validate_output(output)
    }

    fn joint_features(&self, output: &[usize]) -> SparseVector {
        (**self).joint_features(output)
    }

    fn feature_difference(&self, gold: &[usize], predicted: &[usize]) -> SparseVector {
        (**self).feature_difference(gold, predicted)
    }

    fn decode(&self, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
        (**self).decode(weights)
    }

    fn kbest(&self, weights: &[f64], k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        (**self).kbest(weights, k)
    }

    fn forbidden_scores(&self, weights: &[f64], predicted: &[usize]) -> Result<Vec<Option<f64>>> {
        (**self).forbidden_scores(weights, predicted)
    }

    fn unit_marginals(&self, weights: &[f64], predicted: &[usize], c: f64) -> Result<Vec<f64>> {
        (**self).unit_marginals(weights, predicted, c)
    }
}

/// Transition feature bundles, either one `L × L` table shared by every
/// position or one table per position.
#[derive(Debug, Clone, PartialEq)]
pub enum Transitions {
    Shared(Arc<Vec<SparseVector>>),
    PerPosition(Vec<Vec<SparseVector>>),
}

/// Node feature bundles for every (position, label).
#[derive(Debug, Clone, PartialEq)]
enum NodeFeatures {
    Explicit(Vec<Vec<SparseVector>>),
    /// Binary observations conjoined with the label: observation `o` at a
    /// position labeled `y` fires feature `offset + o·L + y`.
    Conjoined {
        offset: usize,
        observations: Vec<Vec<usize>>,
    },
}

/// A sentence for sequence labeling with per-(position, label) node features
/// and per-(position, label pair) transition features.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInstance {
    labels: usize,
    node: NodeFeatures,
    trans: Transitions,
    gold: Vec<usize>,
    max_id: Option<usize>,
}

impl ChainInstance {
    pub fn new(
        labels: usize,
        node: Vec<Vec<SparseVector>>,
        trans: Transitions,
        gold: Vec<usize>,
    ) -> Result<Self> {
        if let Some(p) = node.iter().position(|row| row.len() != labels) {
            return Err(Error::InvalidInstance(format!(
                "position {p} has {} node bundles, expected {labels}",
                node[p].len()
            )));
        }
        let max_id = node.iter().flatten().filter_map(SparseVector::max_id).max();
        Self::build(
            labels,
            node.len(),
            NodeFeatures::Explicit(node),
            max_id,
            trans,
            gold,
        )
    }

    /// An instance whose node features are binary observations conjoined
    /// with the label: observation `o` at a position labeled `y` is feature
    /// `offset + o·labels + y`.
    pub fn conjoined(
        labels: usize,
        offset: usize,
        observations: Vec<Vec<usize>>,
        trans: Transitions,
        gold: Vec<usize>,
    ) -> Result<Self> {
        let max_id = (labels > 0)
            .then(|| observations.iter().flatten().max())
            .flatten()
            .map(|&o| offset + o * labels + labels - 1);
        let n = observations.len();
        let node = NodeFeatures::Conjoined {
            offset,
            observations: observations
                .into_iter()
                .map(|mut row| {
                    row.sort_unstable();
                    row.dedup();
                    row
                })
                .collect(),
        };
        Self::build(labels, n, node, max_id, trans, gold)
    }

    fn build(
        labels: usize,
        n: usize,
        node: NodeFeatures,
        mut max_id: Option<usize>,
        trans: Transitions,
        gold: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("chain instance"));
        }
        if labels == 0 {
            return Err(Error::InvalidInstance(
                "label count must be positive".into(),
            ));
        }
        match &trans {
            Transitions::Shared(table) => {
                if table.len() != labels * labels {
                    return Err(Error::InvalidInstance(format!(
                        "shared transition table has {} bundles, expected {}",
                        table.len(),
                        labels * labels
                    )));
                }
                max_id = max_id.max(table.iter().filter_map(SparseVector::max_id).max());
            }
            Transitions::PerPosition(tables) => {
                if tables.len() != n - 1 {
                    return Err(Error::InvalidInstance(format!(
                        "expected {} transition tables, got {}",
                        n - 1,
                        tables.len()
                    )));
                }
                if tables.iter().any(|t| t.len() != labels * labels) {
                    return Err(Error::InvalidInstance(
                        "transition table does not cover every label pair".into(),
                    ));
                }
                max_id = max_id.max(
                    tables
                        .iter()
                        .flatten()
                        .filter_map(SparseVector::max_id)
                        .max(),
                );
            }
        }
        if gold.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: gold.len(),
            });
        }
        if let Some(&y) = gold.iter().find(|&&y| y >= labels) {
            return Err(Error::InvalidInstance(format!(
                "gold label {y} outside [0, {labels})"
            )));
        }
        Ok(Self {
            labels,
            node,
            trans,
            gold,
            max_id,
        })
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn node_features(&self, p: usize, y: usize) -> SparseVector {
        match &self.node {
            NodeFeatures::Explicit(rows) => rows[p][y].clone(),
            NodeFeatures::Conjoined {
                offset,
                observations,
            } => SparseVector::indicators(
                observations[p]
                    .iter()
                    .map(|&o| offset + o * self.labels + y),
            ),
        }
    }

    fn node_score(&self, p: usize, y: usize, weights: &[f64]) -> f64 {
        match &self.node {
            NodeFeatures::Explicit(rows) => rows[p][y].dot_unchecked(weights),
            NodeFeatures::Conjoined {
                offset,
                observations,
            } => observations[p]
                .iter()
                .map(|&o| weights[offset + o * self.labels + y])
                .sum(),
        }
    }

    fn add_node(&self, acc: &mut SparseAccumulator, p: usize, y: usize, scale: f64) {
        match &self.node {
            NodeFeatures::Explicit(rows) => acc.add(&rows[p][y], scale),
            NodeFeatures::Conjoined { .. } => acc.add(&self.node_features(p, y), scale),
        }
    }

    pub fn transition_features(&self, q: usize, from: usize, to: usize) -> &SparseVector {
        let idx = from * self.labels + to;
        match &self.trans {
            Transitions::Shared(table) => &table[idx],
            Transitions::PerPosition(tables) => &tables[q][idx],
        }
    }

    /// Materializes node and transition scores under `weights`.
    pub fn potentials(&self, weights: &[f64]) -> Result<PotentialTable> {
        self.check_dimension(weights.len())?;
        let (n, l) = (self.len(), self.labels);
        let mut node = Vec::with_capacity(n * l);
        for p in 0..n {
            node.extend((0..l).map(|y| self.node_score(p, y, weights)));
        }
        let trans = match &self.trans {
            Transitions::Shared(table) => {
                let one: Vec<f64> = table.iter().map(|v| v.dot_unchecked(weights)).collect();
                let mut all = Vec::with_capacity((n - 1) * l * l);
                for _ in 1..n {
                    all.extend_from_slice(&one);
                }
                all
            }
            Transitions::PerPosition(tables) => tables
                .iter()
                .flatten()
                .map(|v| v.dot_unchecked(weights))
                .collect(),
        };
        PotentialTable::new(n, l, node, trans)
    }
}

impl Structured for ChainInstance {
    fn units(&self) -> usize {
        self.len()
    }

    fn gold(&self) -> &[usize] {
        &self.gold
    }

    fn max_feature_id(&self) -> Option<usize> {
        self.max_id
    }

    fn feature_support(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = match &self.node {
            NodeFeatures::Explicit(rows) => rows
                .iter()
                .flatten()
                .flat_map(|v| v.iter().map(|(id, _)| id))
                .collect(),
            NodeFeatures::Conjoined {
                offset,
                observations,
            } => observations
                .iter()
                .flatten()
                .flat_map(|&o| (0..self.labels).map(move |y| offset + o * self.labels + y))
                .collect(),
        };
        match &self.trans {
            Transitions::Shared(table) => {
                ids.extend(table.iter().flat_map(|v| v.iter().map(|(id, _)| id)))
            }
            Transitions::PerPosition(tables) => ids.extend(
                tables
                    .iter()
                    .flatten()
                    .flat_map(|v| v.iter().map(|(id, _)| id)),
            ),
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn validate_output(&self, output: &[usize]) -> Result<()> {
        if output.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                actual: output.len(),
            });
        }
        match output.iter().find(|&&y| y >= self.labels) {
            Some(&y) => Err(Error::InvalidInstance(format!("label {y} out of range"))),
            None => Ok(()),
        }
    }

    fn joint_features(&self, output: &[usize]) -> SparseVector {
        let mut acc = SparseAccumulator::default();
        for (p, &y) in output.iter().enumerate() {
            self.add_node(&mut acc, p, y, 1.0);
            if p > 0 {
                acc.add(self.transition_features(p - 1, output[p - 1], y), 1.0);
            }
        }
        acc.finish()
    }

    fn feature_difference(&self, gold: &[usize], predicted: &[usize]) -> SparseVector {
        // Only factors whose labels differ contribute.
        let mut acc = SparseAccumulator::default();
        for p in 0..gold.len() {
            if gold[p] != predicted[p] {
                self.add_node(&mut acc, p, gold[p], 1.0);
                self.add_node(&mut acc, p, predicted[p], -1.0);
            }
            if p > 0 && (gold[p - 1], gold[p]) != (predicted[p - 1], predicted[p]) {
                acc.add(self.transition_features(p - 1, gold[p - 1], gold[p]), 1.0);
                acc.add(
                    self.transition_features(p - 1, predicted[p - 1], predicted[p]),
                    -1.0,
                );
            }
        }
        acc.finish()
    }

    fn decode(&self, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
        Ok(chain::viterbi(&self.potentials(weights)?))
    }

    fn kbest(&self, weights: &[f64], k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        Ok(chain::kbest_viterbi(&self.potentials(weights)?, k))
    }

    fn forbidden_scores(&self, weights: &[f64], predicted: &[usize]) -> Result<Vec<Option<f64>>> {
        let mm = MaxMarginals::new(&self.potentials(weights)?);
        Ok(predicted
            .iter()
            .enumerate()
            .map(|(p, &y)| mm.forbidden(p, y))
            .collect())
    }

    fn unit_marginals(&self, weights: &[f64], predicted: &[usize], c: f64) -> Result<Vec<f64>> {
        let marginals = chain::forward_backward_marginals(&self.potentials(weights)?, c)?;
        Ok(predicted
            .iter()
            .enumerate()
            .map(|(p, &y)| marginals.get(p, y))
            .collect())
    }
}

/// A sentence for dependency parsing with a feature bundle per candidate edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeInstance {
    words: usize,
    // (n+1) × (n+1) row-major by head; unused cells are empty.
    edges: Vec<SparseVector>,
    gold: Vec<usize>,
    max_id: Option<usize>,
}

impl TreeInstance {
    /// `edge_features(h, d)` is called for every `h ∈ 0..=n`, `d ∈ 1..=n`, `h ≠ d`.
    pub fn new(
        words: usize,
        mut edge_features: impl FnMut(usize, usize) -> SparseVector,
        gold_heads: Vec<usize>,
    ) -> Result<Self> {
        if words == 0 {
            return Err(Error::Empty("tree instance"));
        }
        if gold_heads.len() != words {
            return Err(Error::ShapeMismatch {
                expected: words,
                actual: gold_heads.len(),
            });
        }
        tree::validate_heads(&gold_heads)?;
        let m = words + 1;
        let mut edges = vec![SparseVector::new(); m * m];
        for h in 0..m {
            for d in 1..m {
                if h != d {
                    edges[h * m + d] = edge_features(h, d);
                }
            }
        }
        let max_id = edges.iter().filter_map(SparseVector::max_id).max();
        Ok(Self {
            words,
            edges,
            gold: gold_heads,
            max_id,
        })
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn edge_features(&self, head: usize, dep: usize) -> &SparseVector {
        &self.edges[head * (self.words + 1) + dep]
    }

    pub fn edge_weights(&self, weights: &[f64]) -> Result<EdgeWeightMatrix> {
        self.check_dimension(weights.len())?;
        Ok(EdgeWeightMatrix::from_fn(self.words, |h, d| {
            self.edge_features(h, d).dot_unchecked(weights)
        }))
    }
}

impl Structured for TreeInstance {
    fn units(&self) -> usize {
        self.words
    }

    fn gold(&self) -> &[usize] {
        &self.gold
    }

    fn max_feature_id(&self) -> Option<usize> {
        self.max_id
    }

    fn feature_support(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .edges
            .iter()
            .flat_map(|v| v.iter().map(|(id, _)| id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn validate_output(&self, output: &[usize]) -> Result<()> {
        if output.len() != self.words {
            return Err(Error::ShapeMismatch {
                expected: self.words,
                actual: output.len(),
            });
        }
        tree::validate_heads(output)
    }

    fn joint_features(&self, output: &[usize]) -> SparseVector {
        let mut acc = SparseAccumulator::default();
        for (i, &h) in output.iter().enumerate() {
            acc.add(self.edge_features(h, i + 1), 1.0);
        }
        acc.finish()
    }

    fn feature_difference(&self, gold: &[usize], predicted: &[usize]) -> SparseVector {
        let mut acc = SparseAccumulator::default();
        for i in 0..gold.len() {
            if gold[i] != predicted[i] {
                acc.add(self.edge_features(gold[i], i + 1), 1.0);
                acc.add(self.edge_features(predicted[i], i + 1), -1.0);
            }
        }
        acc.finish()
    }

    fn decode(&self, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
        let t = tree::cle_decode(&self.edge_weights(weights)?)?;
        Ok((t.heads, t.score))
    }

    fn kbest(&self, weights: &[f64], k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        Ok(tree::kbest_arborescences(&self.edge_weights(weights)?, k)
            .into_iter()
            .map(|t| (t.heads, t.score))
            .collect())
    }

    fn forbidden_scores(&self, weights: &[f64], predicted: &[usize]) -> Result<Vec<Option<f64>>> {
        let w = self.edge_weights(weights)?;
        predicted
            .iter()
            .enumerate()
            .map(
                |(i, &h)| match tree::constrained_cle(&w, i + 1, HeadConstraint::Forbid(h)) {
                    Ok(t) => Ok(Some(t.score)),
                    Err(Error::NoTree) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect()
    }
}

/// Free-function form of [`Structured::feature_difference`].
pub fn feature_difference<S: Structured + ?Sized>(
    instance: &S,
    gold: &[usize],
    predicted: &[usize],
) -> Result<SparseVector> {
    instance.validate_output(gold)?;
    instance.validate_output(predicted)?;
    Ok(instance.feature_difference(gold, predicted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_position() -> ChainInstance {
        ChainInstance::new(
            2,
            vec![vec![
                SparseVector::indicators([0]),
                SparseVector::indicators([1]),
            ]],
            Transitions::PerPosition(vec![]),
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn identical_outputs_have_empty_difference() {
        let x = one_position();
        assert!(feature_difference(&x, &[1], &[1]).unwrap().is_empty());
    }

    #[test]
    fn single_position_disjoint_difference() {
        let x = one_position();
        let g = feature_difference(&x, &[0], &[1]).unwrap();
        assert_eq!(g.entries(), &[(0, 1.0), (1, -1.0)]);
    }

    #[test]
    fn rejects_bad_gold_and_uncovered_tables() {
        let node = vec![vec![SparseVector::new(); 2]];
        assert!(
            ChainInstance::new(2, node.clone(), Transitions::PerPosition(vec![]), vec![2]).is_err()
        );
        assert!(ChainInstance::new(3, node, Transitions::PerPosition(vec![]), vec![0]).is_err());
    }

    #[test]
    fn zero_weights_give_zero_potentials() {
        let x = one_position();
        let t = x.potentials(&[0.0, 0.0]).unwrap();
        assert_eq!((t.node(0, 0), t.node(0, 1)), (0.0, 0.0));
        let t = x.potentials(&[0.0, 1.0]).unwrap();
        assert_eq!((t.node(0, 0), t.node(0, 1)), (0.0, 1.0));
        assert!(matches!(x.potentials(&[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn tree_instance_requires_valid_gold() {
        assert!(TreeInstance::new(2, |_, _| SparseVector::new(), vec![0, 0]).is_err());
        assert!(TreeInstance::new(2, |_, _| SparseVector::new(), vec![0, 1]).is_ok());
    }
}
