//! Dynamic programming over first-order linear chains.
//!
//! All decoders work on a [`PotentialTable`]: node scores `node(p, y)` and
//! transition scores `trans(q, y, y')` between positions `q` and `q + 1`.
//! The score of a labeling is accumulated left to right as
//! `node(0, y0) + trans(0, y0, y1) + node(1, y1) + ...`, and every decoder
//! reports scores in that same summation order.
//!
//! Ties are broken towards the lexicographically smallest labeling, which is
//! what "lowest label index first" yields when decoding from the left.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    len: usize,
    labels: usize,
    node: Vec<f64>,
    trans: Vec<f64>,
}

impl PotentialTable {
    /// `node` is `len × labels` row-major, `trans` is `(len-1) × labels × labels`.
    pub fn new(len: usize, labels: usize, node: Vec<f64>, trans: Vec<f64>) -> Result<Self> {
        if len == 0 || labels == 0 {
            return Err(Error::Empty("potential table"));
        }
        if node.len() != len * labels {
            return Err(Error::ShapeMismatch {
                expected: len * labels,
                actual: node.len(),
            });
        }
        let expected_trans = (len - 1) * labels * labels;
        if trans.len() != expected_trans {
            return Err(Error::ShapeMismatch {
                expected: expected_trans,
                actual: trans.len(),
            });
        }
        if node.iter().chain(trans.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(
                "potential tables must be finite".into(),
            ));
        }
        Ok(Self {
            len,
            labels,
            node,
            trans,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_nested(node: &[Vec<f64>], trans: &[Vec<Vec<f64>>]) -> Result<Self> {
        let len = node.len();
        let labels = node.first().map_or(0, Vec::len);
        let flat_node: Vec<f64> = node.iter().flatten().copied().collect();
        let flat_trans: Vec<f64> = trans.iter().flatten().flatten().copied().collect();
        Self::new(len, labels, flat_node, flat_trans)
    }

    pub fn zeros(len: usize, labels: usize) -> Result<Self> {
        Self::new(
            len,
            labels,
            vec![0.0; len * labels],
            vec![0.0; len.saturating_sub(1) * labels * labels],
        )
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    #[inline]
    pub fn node(&self, p: usize, y: usize) -> f64 {
        self.node[p * self.labels + y]
    }

    #[inline]
    pub fn trans(&self, q: usize, from: usize, to: usize) -> f64 {
        self.trans[(q * self.labels + from) * self.labels + to]
    }

    pub fn score(&self, labeling: &[usize]) -> f64 {
        let mut s = self.node(0, labeling[0]);
        for p in 1..self.len {
            s = s + self.trans(p - 1, labeling[p - 1], labeling[p]) + self.node(p, labeling[p]);
        }
        s
    }
}

/// Per-position marginal distributions over labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    labels: usize,
    probs: Vec<f64>,
}

impl MarginalTable {
    pub fn len(&self) -> usize {
        self.probs.len() / self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, p: usize, y: usize) -> f64 {
        self.probs[p * self.labels + y]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.probs[p * self.labels..(p + 1) * self.labels]
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Best suffix scores: `beta[p][y]` is the best score of positions `p+1..`
/// given label `y` at `p` (excluding `node(p, y)`).
fn backward_max(t: &PotentialTable) -> Vec<f64> {
    let (n, l) = (t.len, t.labels);
    let mut beta = vec![0.0; n * l];
    for p in (0..n - 1).rev() {
        for y in 0..l {
            let mut best = f64::NEG_INFINITY;
            for y2 in 0..l {
                let v = t.trans(p, y, y2) + t.node(p + 1, y2) + beta[(p + 1) * l + y2];
                if v > best {
                    best = v;
                }
            }
            beta[p * l + y] = best;
        }
    }
    beta
}

/// Best prefix scores: `alpha[p][y]` is the best score of positions `..=p`
/// with label `y` at `p` (including `node(p, y)`).
fn forward_max(t: &PotentialTable) -> Vec<f64> {
    let (n, l) = (t.len, t.labels);
    let mut alpha = vec![0.0; n * l];
    for y in 0..l {
        alpha[y] = t.node(0, y);
    }
    for p in 1..n {
        for y in 0..l {
            let mut best = f64::NEG_INFINITY;
            for y0 in 0..l {
                let v = alpha[(p - 1) * l + y0] + t.trans(p - 1, y0, y);
                if v > best {
                    best = v;
                }
            }
            alpha[p * l + y] = best + t.node(p, y);
        }
    }
    alpha
}

/// Highest-scoring labeling and its score.
pub fn viterbi(t: &PotentialTable) -> (Vec<usize>, f64) {
    let l = t.labels;
    let beta = backward_max(t);
    let mut labeling = Vec::with_capacity(t.len);
    let (y0, _) = argmax_first((0..l).map(|y| t.node(0, y) + beta[y]));
    labeling.push(y0);
    for p in 1..t.len {
        let prev = labeling[p - 1];
        let (y, _) =
            argmax_first((0..l).map(|y| t.trans(p - 1, prev, y) + t.node(p, y) + beta[p * l + y]));
        labeling.push(y);
    }
    let score = t.score(&labeling);
    (labeling, score)
}

#[derive(Debug, Clone, Copy)]
struct KEntry {
    score: f64,
    prev_label: u32,
    prev_rank: u32,
}

struct KLattice {
    labels: usize,
    /// `cells[p * labels + y]` holds the ranked partial paths ending in `y` at `p`.
    cells: Vec<Vec<KEntry>>,
}

impl KLattice {
    fn prefix(&self, p: usize, y: usize, rank: usize) -> Vec<usize> {
        let mut out = vec![0; p + 1];
        let (mut y, mut rank) = (y, rank);
        for q in (0..=p).rev() {
            out[q] = y;
            let e = self.cells[q * self.labels + y][rank];
            y = e.prev_label as usize;
            rank = e.prev_rank as usize;
        }
        out
    }

    /// Ordering of candidate partial paths `(score, p, y, rank)`: higher score
    /// first, then lexicographically smaller prefix.
    fn compare(&self, a: (f64, usize, usize, usize), b: (f64, usize, usize, usize)) -> Ordering {
        match b.0.total_cmp(&a.0) {
            Ordering::Equal => self.prefix(a.1, a.2, a.3).cmp(&self.prefix(b.1, b.2, b.3)),
            other => other,
        }
    }
}

/// The `k` highest-scoring distinct labelings in non-increasing score order,
/// ties ordered lexicographically.
pub fn kbest_viterbi(t: &PotentialTable, k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return Vec::new();
    }
    let (n, l) = (t.len, t.labels);
    let mut lattice = KLattice {
        labels: l,
        cells: Vec::with_capacity(n * l),
    };
    for y in 0..l {
        lattice.cells.push(vec![KEntry {
            score: t.node(0, y),
            prev_label: 0,
            prev_rank: 0,
        }]);
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for p in 1..n {
        for y in 0..l {
            candidates.clear();
            for y0 in 0..l {
                let tr = t.trans(p - 1, y0, y);
                for (r, e) in lattice.cells[(p - 1) * l + y0].iter().enumerate() {
                    candidates.push((e.score + tr + t.node(p, y), y0, r));
                }
            }
            // Candidates share the final label, so comparing the predecessor
            // prefixes orders the extended prefixes.
            candidates
                .sort_by(|a, b| lattice.compare((a.0, p - 1, a.1, a.2), (b.0, p - 1, b.1, b.2)));
            candidates.truncate(k);
            let cell = candidates
                .iter()
                .map(|&(score, y0, r)| KEntry {
                    score,
                    prev_label: y0 as u32,
                    prev_rank: r as u32,
                })
                .collect();
            lattice.cells.push(cell);
        }
    }
    let mut finals: Vec<(f64, usize, usize)> = Vec::new();
    for y in 0..l {
        for (r, e) in lattice.cells[(n - 1) * l + y].iter().enumerate() {
            finals.push((e.score, y, r));
        }
    }
    finals.sort_by(|a, b| lattice.compare((a.0, n - 1, a.1, a.2), (b.0, n - 1, b.1, b.2)));
    finals.truncate(k);
    finals
        .into_iter()
        .map(|(score, y, r)| (lattice.prefix(n - 1, y, r), score))
        .collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Label marginals under `P(z) ∝ exp(c · score(z))`, computed in log space.
pub fn forward_backward_marginals(t: &PotentialTable, c: f64) -> Result<MarginalTable> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Config(format!(
            "temperature must be positive, got {c}"
        )));
    }
    let (n, l) = (t.len, t.labels);
    let mut alpha = vec![0.0; n * l];
    let mut beta = vec![0.0; n * l];
    let mut buf = vec![0.0; l];
    for y in 0..l {
        alpha[y] = c * t.node(0, y);
    }
    for p in 1..n {
        for y in 0..l {
            for y0 in 0..l {
                buf[y0] = alpha[(p - 1) * l + y0] + c * t.trans(p - 1, y0, y);
            }
            alpha[p * l + y] = c * t.node(p, y) + log_sum_exp(&buf);
        }
    }
    for p in (0..n - 1).rev() {
        for y in 0..l {
            for y2 in 0..l {
                buf[y2] = c * (t.trans(p, y, y2) + t.node(p + 1, y2)) + beta[(p + 1) * l + y2];
            }
            beta[p * l + y] = log_sum_exp(&buf);
        }
    }
    let log_z = log_sum_exp(&alpha[(n - 1) * l..]);
    let mut probs = vec![0.0; n * l];
    for p in 0..n {
        let row = &mut probs[p * l..(p + 1) * l];
        for y in 0..l {
            row[y] = (alpha[p * l + y] + beta[p * l + y] - log_z).exp();
        }
        let total: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(MarginalTable { labels: l, probs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelConstraint {
    Forbid(usize),
    Force(usize),
}

/// Max-marginal scores: the best total score of any labeling with a given
/// label at a given position, for all `(p, y)` from one forward and one
/// backward max-product pass.
#[derive(Debug, Clone)]
pub struct MaxMarginals {
    labels: usize,
    values: Vec<f64>,
}

impl MaxMarginals {
    pub fn new(t: &PotentialTable) -> Self {
        let alpha = forward_max(t);
        let beta = backward_max(t);
        let values = alpha.iter().zip(&beta).map(|(a, b)| a + b).collect();
        Self {
            labels: t.labels,
            values,
        }
    }

    pub fn forced(&self, p: usize, y: usize) -> f64 {
        self.values[p * self.labels + y]
    }

    /// Best score with label `y` excluded at `p`; `None` when `L = 1`.
    pub fn forbidden(&self, p: usize, y: usize) -> Option<f64> {
        (0..self.labels)
            .filter(|&y2| y2 != y)
            .map(|y2| self.forced(p, y2))
            .fold(None, |best: Option<f64>, v| {
                Some(best.map_or(v, |b| b.max(v)))
            })
    }
}

pub fn constrained_best_score(
    t: &PotentialTable,
    p: usize,
    constraint: LabelConstraint,
) -> Result<f64> {
    if p >= t.len {
        return Err(Error::ShapeMismatch {
            expected: t.len,
            actual: p,
        });
    }
    let label = match constraint {
        LabelConstraint::Forbid(y) | LabelConstraint::Force(y) => y,
    };
    if label >= t.labels {
        return Err(Error::Config(format!("label {label} out of range")));
    }
    let mm = MaxMarginals::new(t);
    match constraint {
        LabelConstraint::Force(y) => Ok(mm.forced(p, y)),
        LabelConstraint::Forbid(y) => mm
            .forbidden(p, y)
            .ok_or_else(|| Error::Infeasible("cannot forbid the only label".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_position_viterbi() {
        let t = PotentialTable::from_nested(&[vec![2.0, 1.0]], &[]).unwrap();
        assert_eq!(viterbi(&t), (vec![0], 2.0));
    }

    #[test]
    fn zero_table_ties_pick_lowest_labels() {
        let t = PotentialTable::zeros(3, 2).unwrap();
        assert_eq!(viterbi(&t), (vec![0, 0, 0], 0.0));
        let all = kbest_viterbi(&t, 8);
        assert_eq!(all.len(), 8);
        let labelings: Vec<Vec<usize>> = all.into_iter().map(|(z, _)| z).collect();
        let mut sorted = labelings.clone();
        sorted.sort();
        assert_eq!(labelings, sorted);
    }

    #[test]
    fn kbest_k1_is_viterbi() {
        let t = PotentialTable::from_nested(
            &[vec![0.3, 1.2, -0.5], vec![0.9, 0.1, 0.4]],
            &[vec![
                vec![0.2, -0.3, 0.0],
                vec![0.5, 0.5, -1.0],
                vec![0.0, 0.1, 0.2],
            ]],
        )
        .unwrap();
        let best = viterbi(&t);
        assert_eq!(kbest_viterbi(&t, 1), vec![best]);
    }

    #[test]
    fn closed_form_marginals() {
        let t = PotentialTable::from_nested(&[vec![0.0, 0.0]], &[]).unwrap();
        let m = forward_backward_marginals(&t, 1.0).unwrap();
        assert_eq!(m.row(0), &[0.5, 0.5]);
        let t = PotentialTable::from_nested(&[vec![3f64.ln(), 0.0]], &[]).unwrap();
        let m = forward_backward_marginals(&t, 1.0).unwrap();
        assert!((m.get(0, 0) - 0.75).abs() < 1e-12);
        assert!((m.get(0, 1) - 0.25).abs() < 1e-12);
        assert!(forward_backward_marginals(&t, 0.0).is_err());
    }

    #[test]
    fn constrained_examples() {
        let t = PotentialTable::from_nested(&[vec![5.0, 3.0]], &[]).unwrap();
        assert_eq!(
            constrained_best_score(&t, 0, LabelConstraint::Forbid(0)).unwrap(),
            3.0
        );
        let single = PotentialTable::from_nested(&[vec![1.0]], &[]).unwrap();
        assert!(matches!(
            constrained_best_score(&single, 0, LabelConstraint::Forbid(0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(PotentialTable::zeros(0, 2).is_err());
        assert!(PotentialTable::from_nested(&[vec![f64::NAN]], &[]).is_err());
    }
}
