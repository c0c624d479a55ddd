//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use structconf::chain::PotentialTable;
use structconf::tree::EdgeWeightMatrix;
use structconf::{ChainInstance, SparseVector, Transitions, TreeInstance};

/// A chain score table held as plain nested vectors, independent of the
/// library's own layout.
#[derive(Debug, Clone)]
pub struct ChainTable {
    pub node: Vec<Vec<f64>>,
    pub trans: Vec<Vec<Vec<f64>>>,
}

impl ChainTable {
    pub fn random(rng: &mut impl Rng, n: usize, labels: usize) -> Self {
        let mut value = || rng.random_range(-2.0..2.0);
        let node = (0..n)
            .map(|_| (0..labels).map(|_| value()).collect())
            .collect();
        let trans = (1..n)
            .map(|_| {
                (0..labels)
                    .map(|_| (0..labels).map(|_| value()).collect())
                    .collect()
            })
            .collect();
        Self { node, trans }
    }

    /// Small integer scores, so that many labelings tie.
    pub fn random_integer(rng: &mut impl Rng, n: usize, labels: usize) -> Self {
        let mut value = || f64::from(rng.random_range(-1i32..=1));
        let node = (0..n)
            .map(|_| (0..labels).map(|_| value()).collect())
            .collect();
        let trans = (1..n)
            .map(|_| {
                (0..labels)
                    .map(|_| (0..labels).map(|_| value()).collect())
                    .collect()
            })
            .collect();
        Self { node, trans }
    }

    pub fn len(&self) -> usize {
        self.node.len()
    }

    pub fn labels(&self) -> usize {
        self.node[0].len()
    }

    pub fn to_potentials(&self) -> PotentialTable {
        PotentialTable::from_nested(&self.node, &self.trans).unwrap()
    }

    pub fn score(&self, y: &[usize]) -> f64 {
        let mut s = 0.0;
        for (p, &label) in y.iter().enumerate() {
            s += self.node[p][label];
            if p > 0 {
                s += self.trans[p - 1][y[p - 1]][label];
            }
        }
        s
    }

    /// An instance with one indicator feature per table entry, plus the
    /// weight vector that reproduces the table.
    pub fn to_instance(&self, gold: Vec<usize>) -> (ChainInstance, Vec<f64>) {
        let (n, l) = (self.len(), self.labels());
        let mut weights = Vec::new();
        let node = (0..n)
            .map(|p| {
                (0..l)
                    .map(|y| {
                        weights.push(self.node[p][y]);
                        SparseVector::indicators([weights.len() - 1])
                    })
                    .collect()
            })
            .collect();
        let trans = (0..n - 1)
            .map(|q| {
                let mut row = Vec::with_capacity(l * l);
                for a in 0..l {
                    for b in 0..l {
                        weights.push(self.trans[q][a][b]);
                        row.push(SparseVector::indicators([weights.len() - 1]));
                    }
                }
                row
            })
            .collect();
        let x = ChainInstance::new(l, node, Transitions::PerPosition(trans), gold).unwrap();
        (x, weights)
    }
}

/// Every labeling of length `n` over `labels` labels, in lexicographic order.
pub fn all_labelings(n: usize, labels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..labels).map(move |y| {
                    let mut next = prefix.clone();
                    next.push(y);
                    next
                })
            })
            .collect();
    }
    out
}

/// All labelings with their scores, best first; ties in lexicographic order.
pub fn ranked_labelings(t: &ChainTable) -> Vec<(Vec<usize>, f64)> {
    let mut all: Vec<(Vec<usize>, f64)> = all_labelings(t.len(), t.labels())
        .into_iter()
        .map(|y| {
            let s = t.score(&y);
            (y, s)
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all
}

/// Marginal probability of label `y` at `p` with temperature `c`.
pub fn brute_marginal(t: &ChainTable, c: f64, p: usize, y: usize) -> f64 {
    let all = all_labelings(t.len(), t.labels());
    let max = all
        .iter()
        .map(|z| t.score(z))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut hit = 0.0;
    for z in &all {
        let w = (c * (t.score(z) - max)).exp();
        total += w;
        if z[p] == y {
            hit += w;
        }
    }
    hit / total
}

/// Best score among labelings satisfying `keep`.
pub fn brute_best_where(t: &ChainTable, keep: impl Fn(&[usize]) -> bool) -> Option<f64> {
    all_labelings(t.len(), t.labels())
        .into_iter()
        .filter(|z| keep(z))
        .map(|z| t.score(&z))
        .reduce(f64::max)
}

/// Edge scores `w[h][d]` for `h ∈ 0..=n`, `d ∈ 1..=n`; `None` marks a
/// forbidden edge.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub w: Vec<Vec<Option<f64>>>,
}

impl EdgeTable {
    pub fn random(rng: &mut impl Rng, n: usize, forbid_rate: f64) -> Self {
        let w = (0..=n)
            .map(|h| {
                (0..=n)
                    .map(|d| {
                        if d == 0 || h == d || rng.random_bool(forbid_rate) {
                            None
                        } else {
                            Some(rng.random_range(-3.0..3.0))
                        }
                    })
                    .collect()
            })
            .collect();
        Self { w }
    }

    pub fn words(&self) -> usize {
        self.w.len() - 1
    }

    pub fn to_matrix(&self) -> EdgeWeightMatrix {
        EdgeWeightMatrix::from_fn(self.words(), |h, d| {
            self.w[h][d].unwrap_or(f64::NEG_INFINITY)
        })
    }

    pub fn score(&self, heads: &[usize]) -> Option<f64> {
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| self.w[h][i + 1])
            .sum()
    }

    /// A tree instance with one indicator per edge and matching weights.
    /// Every edge must be allowed.
    pub fn to_instance(&self, gold: Vec<usize>) -> (TreeInstance, Vec<f64>) {
        let m = self.words() + 1;
        let weights: Vec<f64> = (0..m * m)
            .map(|i| self.w[i / m][i % m].unwrap_or(0.0))
            .collect();
        let x = TreeInstance::new(
            self.words(),
            |h, d| SparseVector::indicators([h * m + d]),
            gold,
        )
        .unwrap();
        (x, weights)
    }
}

/// Whether `heads` (1-based words, 0 = root) forms a tree with exactly one
/// word attached to the root.
pub fn is_single_root_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    if heads.iter().enumerate().any(|(i, &h)| h == i + 1 || h > n) {
        return false;
    }
    (1..=n).all(|start| {
        let mut d = start;
        for _ in 0..=n {
            if d == 0 {
                return true;
            }
            d = heads[d - 1];
        }
        false
    })
}

pub fn all_trees(n: usize) -> Vec<Vec<usize>> {
    all_labelings(n, n + 1)
        .into_iter()
        .filter(|h| is_single_root_tree(h))
        .collect()
}

/// Feasible trees with scores, best first.
pub fn ranked_trees(t: &EdgeTable, keep: impl Fn(&[usize]) -> bool) -> Vec<(Vec<usize>, f64)> {
    let mut all: Vec<(Vec<usize>, f64)> = all_trees(t.words())
        .into_iter()
        .filter(|h| keep(h))
        .filter_map(|h| t.score(&h).map(|s| (h, s)))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all
}

/// Shared transition bundles with one indicator per label pair, starting at `offset`.
pub fn shared_transitions(labels: usize, offset: usize) -> Transitions {
    Transitions::Shared(Arc::new(
        (0..labels * labels)
            .map(|i| SparseVector::indicators([offset + i]))
            .collect(),
    ))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol || (a.is_infinite() && a == b)
}
