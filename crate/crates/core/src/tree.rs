//! Maximum spanning arborescences for non-projective dependency parsing.
//!
//! Node 0 is the artificial root; words are `1..=n`. A valid parse gives
//! every word exactly one head, contains no cycle and attaches exactly one
//! word to the root. Forbidden edges carry `f64::NEG_INFINITY` and are never
//! summed into a score.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const FORBIDDEN: f64 = f64::NEG_INFINITY;

/// Edge scores `w[h][d]` for heads `h ∈ 0..=n` and dependents `d ∈ 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    words: usize,
    // (n+1) × (n+1), column 0 and the diagonal are forbidden.
    w: Vec<f64>,
}

impl EdgeWeightMatrix {
    /// All edges forbidden; fill with [`EdgeWeightMatrix::set`].
    pub fn forbidden(words: usize) -> Self {
        let m = words + 1;
        Self {
            words,
            w: vec![FORBIDDEN; m * m],
        }
    }

    /// Builds from a closure over every admissible `(head, dependent)` pair.
    pub fn from_fn(words: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::forbidden(words);
        for h in 0..=words {
            for d in 1..=words {
                if h != d {
                    out.set(h, d, f(h, d));
                }
            }
        }
        out
    }

    pub fn words(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn get(&self, head: usize, dep: usize) -> f64 {
        self.w[head * (self.words + 1) + dep]
    }

    /// Sets an edge score. Self-edges and edges into the root stay forbidden;
    /// NaN is treated as forbidden.
    pub fn set(&mut self, head: usize, dep: usize, value: f64) {
        if dep == 0 || head == dep || head > self.words || dep > self.words {
            return;
        }
        let v = if value.is_nan() { FORBIDDEN } else { value };
        self.w[head * (self.words + 1) + dep] = v;
    }

    pub fn forbid(&mut self, head: usize, dep: usize) {
        self.set(head, dep, FORBIDDEN);
    }

    /// Sum of the edge scores of a head assignment (`heads[d-1]` is the head of `d`).
    pub fn score(&self, heads: &[usize]) -> f64 {
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| self.get(h, i + 1))
            .sum()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let m = self.words + 1;
        (0..m)
            .map(|h| self.w[h * m..(h + 1) * m].to_vec())
            .collect()
    }
}

/// A dependency tree: `heads[d-1]` is the head of word `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arborescence {
    pub heads: Vec<usize>,
    pub score: f64,
}

impl Arborescence {
    pub fn head_of(&self, dep: usize) -> usize {
        self.heads[dep - 1]
    }
}

/// Checks that `heads` is a spanning arborescence with a single root child.
pub fn validate_heads(heads: &[usize]) -> Result<()> {
    let n = heads.len();
    if n == 0 {
        return Err(Error::Empty("head assignment"));
    }
    let mut root_children = 0;
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(Error::InvalidInstance(format!(
                "head {h} of word {} is out of range",
                i + 1
            )));
        }
        if h == i + 1 {
            return Err(Error::InvalidInstance(format!(
                "word {} heads itself",
                i + 1
            )));
        }
        if h == 0 {
            root_children += 1;
        }
    }
    if root_children != 1 {
        return Err(Error::InvalidInstance(format!(
            "expected exactly one word attached to the root, found {root_children}"
        )));
    }
    for start in 1..=n {
        let mut v = start;
        let mut steps = 0;
        while v != 0 {
            v = heads[v - 1];
            steps += 1;
            if steps > n {
                return Err(Error::InvalidInstance(format!(
                    "cycle through word {start}"
                )));
            }
        }
    }
    Ok(())
}

fn find_cycle(head: &[usize]) -> Option<Vec<usize>> {
    let m = head.len();
    // 0 = unvisited, 1 = on current walk, 2 = done
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = head[v];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&u| u == v).unwrap();
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            for &u in &path {
                state[u] = 2;
            }
            return Some(cycle);
        }
        for &u in &path {
            state[u] = 2;
        }
    }
    None
}

/// Unconstrained Chu-Liu-Edmonds on a dense matrix with node 0 as root.
/// Returns `head[v]` for every node (`head[0]` is meaningless).
fn chu_liu_edmonds(w: &[Vec<f64>]) -> Option<Vec<usize>> {
    let m = w.len();
    let mut head = vec![0usize; m];
    for v in 1..m {
        let mut best = (usize::MAX, FORBIDDEN);
        for (u, row) in w.iter().enumerate() {
            if u != v && row[v] > best.1 {
                best = (u, row[v]);
            }
        }
        if best.0 == usize::MAX {
            return None;
        }
        head[v] = best.0;
    }
    let cycle = match find_cycle(&head) {
        None => return Some(head),
        Some(c) => c,
    };

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let mut map = vec![usize::MAX; m];
    let mut inverse = Vec::new();
    for v in 0..m {
        if !in_cycle[v] {
            map[v] = inverse.len();
            inverse.push(v);
        }
    }
    let c = inverse.len();
    let mm = c + 1;
    let mut w2 = vec![vec![FORBIDDEN; mm]; mm];
    let mut enter = vec![usize::MAX; mm];
    let mut leave = vec![usize::MAX; mm];
    let cycle_score: f64 = cycle.iter().map(|&v| w[head[v]][v]).sum();

    for (u2, &u) in inverse.iter().enumerate() {
        for (v2, &v) in inverse.iter().enumerate() {
            w2[u2][v2] = w[u][v];
        }
        let mut best = (usize::MAX, FORBIDDEN);
        for &v in &cycle {
            if w[u][v] == FORBIDDEN {
                continue;
            }
            let s = w[u][v] - w[head[v]][v] + cycle_score;
            if s > best.1 {
                best = (v, s);
            }
        }
        if best.0 != usize::MAX {
            w2[u2][c] = best.1;
            enter[u2] = best.0;
        }
    }
    for (v2, &v) in inverse.iter().enumerate().skip(1) {
        let mut best = (usize::MAX, FORBIDDEN);
        for &u in &cycle {
            if w[u][v] > best.1 {
                best = (u, w[u][v]);
            }
        }
        if best.0 != usize::MAX {
            w2[c][v2] = best.1;
            leave[v2] = best.0;
        }
    }

    let head2 = chu_liu_edmonds(&w2)?;
    let mut out = head.clone();
    for (v2, &v) in inverse.iter().enumerate().skip(1) {
        let h2 = head2[v2];
        out[v] = if h2 == c { leave[v2] } else { inverse[h2] };
    }
    let u2 = head2[c];
    out[enter[u2]] = inverse[u2];
    Some(out)
}

fn solve_rows(rows: &[Vec<f64>]) -> Option<Vec<usize>> {
    chu_liu_edmonds(rows).map(|head| head[1..].to_vec())
}

/// Maximum-score arborescence with exactly one word attached to the root.
pub fn cle_decode(w: &EdgeWeightMatrix) -> Result<Arborescence> {
    let n = w.words;
    if n == 0 {
        return Err(Error::Empty("sentence"));
    }
    let rows = w.rows();
    let heads = solve_rows(&rows).ok_or(Error::NoTree)?;
    if heads.iter().filter(|&&h| h == 0).count() == 1 {
        let score = w.score(&heads);
        return Ok(Arborescence { heads, score });
    }
    // Try every admissible root child in turn; the lower index wins ties.
    let mut best: Option<Arborescence> = None;
    for child in 1..=n {
        if w.get(0, child) == FORBIDDEN {
            continue;
        }
        let mut masked = rows.clone();
        for (d, cell) in masked[0].iter_mut().enumerate() {
            if d != child {
                *cell = FORBIDDEN;
            }
        }
        if let Some(heads) = solve_rows(&masked) {
            let score = w.score(&heads);
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(Arborescence { heads, score });
            }
        }
    }
    best.ok_or(Error::NoTree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadConstraint {
    Forbid(usize),
    Force(usize),
}

/// Best arborescence subject to one constraint on the head of `dep`.
pub fn constrained_cle(
    w: &EdgeWeightMatrix,
    dep: usize,
    constraint: HeadConstraint,
) -> Result<Arborescence> {
    if dep == 0 || dep > w.words {
        return Err(Error::Config(format!("dependent {dep} out of range")));
    }
    let mut masked = w.clone();
    match constraint {
        HeadConstraint::Forbid(h) => masked.forbid(h, dep),
        HeadConstraint::Force(h) => {
            for other in 0..=w.words {
                if other != h {
                    masked.forbid(other, dep);
                }
            }
        }
    }
    cle_decode(&masked)
}

#[derive(Debug, Clone)]
struct Subspace {
    forced: Vec<Option<usize>>,
    excluded: Vec<(usize, usize)>,
}

impl Subspace {
    fn solve(&self, w: &EdgeWeightMatrix) -> Option<Arborescence> {
        let mut masked = w.clone();
        for (i, f) in self.forced.iter().enumerate() {
            if let Some(h) = *f {
                for other in 0..=w.words {
                    if other != h {
                        masked.forbid(other, i + 1);
                    }
                }
            }
        }
        for &(h, d) in &self.excluded {
            masked.forbid(h, d);
        }
        cle_decode(&masked).ok()
    }
}

struct Candidate {
    tree: Arborescence,
    space: Subspace,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap: higher score first, then lexicographically smaller heads.
    fn cmp(&self, other: &Self) -> Ordering {
        self.tree
            .score
            .total_cmp(&other.tree.score)
            .then_with(|| other.tree.heads.cmp(&self.tree.heads))
    }
}

/// The `k` best distinct arborescences in non-increasing score order.
///
/// Branch-and-exclude: after emitting a tree, its remaining solution space is
/// split into disjoint subspaces (edge `i` excluded, edges before `i` forced)
/// and each subspace's optimum is queued.
pub fn kbest_arborescences(w: &EdgeWeightMatrix, k: usize) -> Vec<Arborescence> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let root = Subspace {
        forced: vec![None; w.words],
        excluded: Vec::new(),
    };
    let mut heap = BinaryHeap::new();
    if let Some(tree) = root.solve(w) {
        heap.push(Candidate { tree, space: root });
    }
    while out.len() < k {
        let Some(Candidate { tree, space }) = heap.pop() else {
            break;
        };
        if out.len() + 1 < k {
            let mut forced = space.forced.clone();
            for d in 1..=w.words {
                if forced[d - 1].is_some() {
                    continue;
                }
                let mut excluded = space.excluded.clone();
                excluded.push((tree.head_of(d), d));
                let child = Subspace {
                    forced: forced.clone(),
                    excluded,
                };
                if let Some(t) = child.solve(w) {
                    heap.push(Candidate {
                        tree: t,
                        space: child,
                    });
                }
                forced[d - 1] = Some(tree.head_of(d));
            }
        }
        out.push(tree);
    }
    out
}
