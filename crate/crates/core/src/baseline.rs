//! Seed-propagation matcher driven by the neighborhood-overlap energy Ω.
//!
//! For a candidate pair `(a, b)` with `a` in graph A and `b` in graph B,
//!
//! ```text
//! Ω(a, b) = 1 - 2 w(μ(N_A(a)) ∩ N_B(b)) / (w(N_A(a)) + w(N_B(b)))
//! ```
//!
//! where `μ` is the current partial projection from A to B and
//! `w(L) = Σ 1 / ln d(v)`. Degree-one nodes use `1 / ln 2` in place of the
//! undefined `1 / ln 1`. A node of the intersection counts with the mean of
//! its weight in A (through its preimage) and in B, which keeps Ω symmetric
//! under swapping the graphs. Ω is infinite when `b` is already the image of
//! another node
//! (or `a` already projects elsewhere).
//!
//! Starting from the anchors, the matcher repeatedly commits the candidate
//! with the lowest Ω, as long as it does not exceed the cutoff. Only pairs
//! with `a` next to a mapped node and `b` next to its image can have Ω < 1,
//! so those are the only candidates scored.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::data::{Adjacency, PairSet, RecordRef};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorKind, PosteriorLinkage};

pub const DEFAULT_CUTOFF: f64 = 0.95;

/// Node weight `1 / ln d`, with `d = 1` replaced by 2.
pub fn node_weight(degree: usize) -> f64 {
    match degree {
        0 => 0.0,
        1 => 1.0 / 2f64.ln(),
        d => 1.0 / (d as f64).ln(),
    }
}

/// A partial injective map from nodes of A to nodes of B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionState {
    forward: Vec<Option<usize>>,
    backward: Vec<Option<usize>>,
}

impl ProjectionState {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        ProjectionState {
            forward: vec![None; n_a],
            backward: vec![None; n_b],
        }
    }

    pub fn image(&self, a: usize) -> Option<usize> {
        self.forward[a]
    }

    pub fn preimage(&self, b: usize) -> Option<usize> {
        self.backward[b]
    }

    pub fn insert(&mut self, a: usize, b: usize) -> Result<()> {
        if self.forward[a].is_some() || self.backward[b].is_some() {
            return Err(Error::Domain(format!("projection of {a} onto {b} breaks injectivity")));
        }
        self.forward[a] = Some(b);
        self.backward[b] = Some(a);
        Ok(())
    }

    /// Mapped pairs in increasing order of the A node.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.forward
            .iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| (a, b)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.forward.iter().filter(|b| b.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn weight_sum(g: &Adjacency, node: usize) -> f64 {
    g.neighbors(node).iter().map(|&x| node_weight(g.degree(x))).sum()
}

/// The Ω energy of projecting `a` onto `b` under the current mapping.
pub fn omega(g_a: &Adjacency, g_b: &Adjacency, mapping: &ProjectionState, a: usize, b: usize) -> f64 {
    if mapping.preimage(b).is_some_and(|p| p != a) || mapping.image(a).is_some_and(|q| q != b) {
        return f64::INFINITY;
    }
    let denom = weight_sum(g_a, a) + weight_sum(g_b, b);
    if denom <= 0.0 {
        return 1.0;
    }
    let shared: f64 = g_a
        .neighbors(a)
        .iter()
        .filter_map(|&x| mapping.image(x).map(|y| (x, y)))
        .filter(|&(_, y)| g_b.has_edge(b, y))
        .map(|(x, y)| 0.5 * (node_weight(g_a.degree(x)) + node_weight(g_b.degree(y))))
        .sum();
    (1.0 - 2.0 * shared / denom).max(0.0)
}

type Entry = Reverse<(u64, usize, usize)>;

fn push_around(g_a: &Adjacency, g_b: &Adjacency, m: &ProjectionState, x: usize, y: usize, heap: &mut BinaryHeap<Entry>) {
    for &a in g_a.neighbors(x) {
        if m.image(a).is_some() {
            continue;
        }
        for &b in g_b.neighbors(y) {
            if m.preimage(b).is_none() {
                // non-negative floats order like their bit patterns
                heap.push(Reverse((omega(g_a, g_b, m, a, b).to_bits(), a, b)));
            }
        }
    }
}

/// Greedy Ω minimization from the anchors. Returns the full projection,
/// anchors included.
pub fn greedy_projection(
    g_a: &Adjacency,
    g_b: &Adjacency,
    anchors: &[(usize, usize)],
    cutoff: f64,
) -> Result<ProjectionState> {
    let mut m = ProjectionState::new(g_a.n_actors(), g_b.n_actors());
    for &(a, b) in anchors {
        if a >= g_a.n_actors() || b >= g_b.n_actors() {
            return Err(Error::Domain(format!("anchor ({a}, {b}) is out of range")));
        }
        m.insert(a, b)?;
    }
    let mut heap = BinaryHeap::new();
    for &(a, b) in anchors {
        push_around(g_a, g_b, &m, a, b, &mut heap);
    }
    while let Some(Reverse((bits, a, b))) = heap.pop() {
        if m.image(a).is_some() || m.preimage(b).is_some() {
            continue;
        }
        let score = omega(g_a, g_b, &m, a, b);
        if score.to_bits() != bits {
            // superseded by a fresher entry
            continue;
        }
        if score > cutoff {
            break;
        }
        m.insert(a, b)?;
        push_around(g_a, g_b, &m, a, b, &mut heap);
    }
    Ok(m)
}

/// Runs [`greedy_projection`] between two files and reports the new links
/// together with the anchors as a linkage estimate.
pub fn greedy_match(g_a: &Adjacency, g_b: &Adjacency, anchors: &PairSet, cutoff: f64) -> Result<PosteriorLinkage> {
    let (fa, fb) = (g_a.file_id, g_b.file_id);
    if fa == fb {
        return Err(Error::Domain("baseline needs two different files".into()));
    }
    let mut seeds = Vec::new();
    for &(x, y) in anchors.pairs() {
        match (x.file, y.file) {
            (f, g) if f == fa && g == fb => seeds.push((x.index, y.index)),
            (f, g) if f == fb && g == fa => seeds.push((y.index, x.index)),
            _ => {}
        }
    }
    let m = greedy_projection(g_a, g_b, &seeds, cutoff)?;
    let pairs = PairSet::new(
        m.pairs()
            .into_iter()
            .map(|(a, b)| (RecordRef::new(fa, a), RecordRef::new(fb, b))),
    )?;
    Ok(PosteriorLinkage {
        pairs,
        estimator: EstimatorKind::OmegaBaseline,
        loss_ratio: None,
        threshold: Some(cutoff),
        exact: false,
    })
}
