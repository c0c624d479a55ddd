//! Sparse feature vectors.
//!
//! A [`SparseVector`] keeps its entries sorted by feature id with no
//! duplicates and no stored zeros, so structural equality is value equality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a canonical vector from arbitrary `(id, value)` pairs.
    /// Repeated ids are summed and zero sums dropped.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut raw: Vec<(usize, f64)> = pairs.into_iter().collect();
        raw.sort_by_key(|&(id, _)| id);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (id, value) in raw {
            match entries.last_mut() {
                Some((last, acc)) if *last == id => *acc += value,
                _ => entries.push((id, value)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Self { entries }
    }

    /// Indicator vector with value 1.0 on each given id (duplicates accumulate).
    pub fn indicators<I>(ids: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        Self::from_pairs(ids.into_iter().map(|id| (id, 1.0)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn max_id(&self) -> Option<usize> {
        self.entries.last().map(|&(id, _)| id)
    }

    /// Dot product with a dense weight vector, rejecting out-of-range ids.
    pub fn dot(&self, weights: &[f64]) -> Result<f64> {
        if let Some(id) = self.max_id() {
            if id >= weights.len() {
                return Err(Error::Dimension {
                    id,
                    dimension: weights.len(),
                });
            }
        }
        Ok(self.dot_unchecked(weights))
    }

    /// Dot product for callers that validated the id range up front.
    #[inline]
    pub(crate) fn dot_unchecked(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(id, v)| v * weights[id]).sum()
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (a, va) = self.entries[i];
            let (b, vb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// `self + scale * other`, in canonical form.
    pub fn add_scaled(&self, other: &SparseVector, scale: f64) -> SparseVector {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let left = self.entries.get(i);
            let right = other.entries.get(j);
            let (id, value) = match (left, right) {
                (Some(&(a, va)), Some(&(b, vb))) if a == b => {
                    i += 1;
                    j += 1;
                    (a, va + scale * vb)
                }
                (Some(&(a, va)), Some(&(b, _))) if a < b => {
                    i += 1;
                    (a, va)
                }
                (Some(&(a, va)), None) => {
                    i += 1;
                    (a, va)
                }
                (_, Some(&(b, vb))) => {
                    j += 1;
                    (b, scale * vb)
                }
                (None, None) => unreachable!(),
            };
            if value != 0.0 {
                out.push((id, value));
            }
        }
        SparseVector { entries: out }
    }

    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        self.add_scaled(other, -1.0)
    }

    /// Adds `scale * self` into a dense vector.
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for &(id, v) in &self.entries {
            dense[id] += scale * v;
        }
    }

    pub fn to_dense(&self, dimension: usize) -> Vec<f64> {
        let mut dense = vec![0.0; dimension];
        self.axpy_into(1.0, &mut dense);
        dense
    }
}

/// Collects many feature bundles and canonicalizes once at the end.
#[derive(Debug, Default)]
pub(crate) struct SparseAccumulator {
    pairs: Vec<(usize, f64)>,
}

impl SparseAccumulator {
    pub fn add(&mut self, v: &SparseVector, scale: f64) {
        self.pairs.extend(v.iter().map(|(id, x)| (id, scale * x)));
    }

    pub fn finish(self) -> SparseVector {
        SparseVector::from_pairs(self.pairs)
    }
}
