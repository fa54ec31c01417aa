//! Posterior summaries of the linkage structure: pairwise match
//! probabilities, the population size, and two point estimates.

mod matching;

pub use matching::{greedy_matching, max_weight_matching};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairSet, RecordRef};
use crate::error::{Error, Result};

/// Above this many candidate records the Binder estimate switches from the
/// exact matching to the greedy one.
pub const EXACT_NODE_LIMIT: usize = 6000;

/// Integer scale for matching weights in `(0, 1]`.
const WEIGHT_SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchProbabilityTable {
    n_samples: usize,
    entries: BTreeMap<(RecordRef, RecordRef), f64>,
}

impl MatchProbabilityTable {
    /// Builds a table from explicit probabilities; zero entries are dropped.
    pub fn from_entries(
        n_samples: usize,
        entries: impl IntoIterator<Item = ((RecordRef, RecordRef), f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((a, b), p) in entries {
            if a.file == b.file {
                return Err(Error::Domain(format!("pair {a}-{b} lies within one file")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
            }
            if p > 0.0 {
                map.insert((a.min(b), a.max(b)), p);
            }
        }
        Ok(MatchProbabilityTable {
            n_samples,
            entries: map,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, a: RecordRef, b: RecordRef) -> f64 {
        self.entries.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RecordRef, RecordRef, f64)> + '_ {
        self.entries.iter().map(|(&(a, b), &p)| (a, b, p))
    }

    /// CSV `file_a,index_a,file_b,index_b,prob` with 1-based indices.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::load(path, e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["file_a", "index_a", "file_b", "index_b", "prob"]).map_err(err)?;
        for (a, b, p) in self.iter() {
            w.write_record([
                (a.file + 1).to_string(),
                (a.index + 1).to_string(),
                (b.file + 1).to_string(),
                (b.index + 1).to_string(),
                p.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_samples(labels: &[Vec<u32>], data: &Dataset) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Domain("no posterior samples".into()));
    }
    if let Some(row) = labels.iter().find(|r| r.len() != data.n_records()) {
        return Err(Error::Domain(format!(
            "sample has {} labels for {} records",
            row.len(),
            data.n_records()
        )));
    }
    Ok(())
}

/// Partner of every record in one sample, checking the pair constraint.
fn partners(row: &[u32], data: &Dataset) -> Result<Vec<Option<usize>>> {
    let mut first: BTreeMap<u32, usize> = BTreeMap::new();
    let mut partner = vec![None; row.len()];
    for (r, &l) in row.iter().enumerate() {
        match first.get(&l) {
            None => {
                first.insert(l, r);
            }
            Some(&s) => {
                if partner[s].is_some() {
                    return Err(Error::Domain(format!("cluster {l} has more than two records")));
                }
                if data.record(s).file == data.record(r).file {
                    return Err(Error::Domain(format!("cluster {l} links two records of one file")));
                }
                partner[s] = Some(r);
                partner[r] = Some(s);
            }
        }
    }
    Ok(partner)
}

/// Share of samples in which each cross-file pair is co-assigned.
pub fn match_probabilities(labels: &[Vec<u32>], data: &Dataset) -> Result<MatchProbabilityTable> {
    check_samples(labels, data)?;
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for row in labels {
        for (r, p) in partners(row, data)?.into_iter().enumerate() {
            if let Some(s) = p.filter(|&s| s > r) {
                *counts.entry((r, s)).or_default() += 1;
            }
        }
    }
    let s = labels.len() as f64;
    MatchProbabilityTable::from_entries(
        labels.len(),
        counts
            .into_iter()
            .map(|((a, b), c)| ((data.record(a), data.record(b)), c as f64 / s)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSizePosterior {
    pub mean: f64,
    pub sd: f64,
    /// Number of samples at each population size.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn population_size_posterior(labels: &[Vec<u32>]) -> Result<PopulationSizePosterior> {
    if labels.is_empty() {
        return Err(Error::Domain("no posterior samples".into()));
    }
    let sizes: Vec<f64> = labels
        .iter()
        .map(|row| {
            let mut l = row.clone();
            l.sort_unstable();
            l.dedup();
            l.len() as f64
        })
        .collect();
    let mut histogram = BTreeMap::new();
    for &n in &sizes {
        *histogram.entry(n as usize).or_default() += 1;
    }
    Ok(PopulationSizePosterior {
        mean: crate::stats::mean(&sizes),
        sd: crate::stats::sd(&sizes),
        histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Binder,
    Mpmms,
    /// The neighborhood-overlap baseline, not a posterior summary.
    OmegaBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMethod {
    /// Exact unless the candidate graph exceeds [`EXACT_NODE_LIMIT`].
    #[default]
    Auto,
    Exact,
    Greedy,
}

/// A point estimate of the linkage structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorLinkage {
    pub pairs: PairSet,
    pub estimator: EstimatorKind,
    pub loss_ratio: Option<f64>,
    pub threshold: Option<f64>,
    /// False when the greedy fallback produced the matching.
    pub exact: bool,
}

/// Posterior expected Binder loss of a matching: each included pair costs
/// `loss_ratio * (1 - p)`, each excluded pair costs `p`.
pub fn expected_binder_loss(table: &MatchProbabilityTable, pairs: &PairSet, loss_ratio: f64) -> f64 {
    let included: f64 = pairs.pairs().iter().map(|&(a, b)| loss_ratio * (1.0 - table.get(a, b))).sum();
    let excluded: f64 = table.iter().filter(|&(a, b, _)| !pairs.contains(a, b)).map(|(_, _, p)| p).sum();
    included + excluded
}

/// Minimizer of the expected Binder loss over valid matchings.
pub fn binder_point_estimate(table: &MatchProbabilityTable, loss_ratio: f64) -> Result<PosteriorLinkage> {
    binder_point_estimate_with(table, loss_ratio, MatchingMethod::Auto)
}

/// Including pair `(a, b)` changes the expected loss by
/// `(1 + r)(tau - p)` with `tau = r / (1 + r)`, so the estimate is the
/// maximum-weight matching on edges `p > tau` with weight `p - tau`.
pub fn binder_point_estimate_with(
    table: &MatchProbabilityTable,
    loss_ratio: f64,
    method: MatchingMethod,
) -> Result<PosteriorLinkage> {
    if !(loss_ratio > 0.0 && loss_ratio.is_finite()) {
        return Err(Error::Config(format!("loss ratio must be positive and finite, got {loss_ratio}")));
    }
    let tau = loss_ratio / (1.0 + loss_ratio);
    let mut ids: BTreeMap<RecordRef, usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (a, b, p) in table.iter() {
        let w = ((p - tau) * WEIGHT_SCALE).round();
        if p <= tau || w < 1.0 {
            continue;
        }
        let mut id = |r: RecordRef| {
            *ids.entry(r).or_insert_with(|| {
                nodes.push(r);
                nodes.len() - 1
            })
        };
        let (ia, ib) = (id(a), id(b));
        edges.push((ia, ib, w as i64));
    }
    let exact = match method {
        MatchingMethod::Exact => true,
        MatchingMethod::Greedy => false,
        MatchingMethod::Auto => nodes.len() <= EXACT_NODE_LIMIT,
    };
    let mate = if exact {
        max_weight_matching(nodes.len(), &edges)
    } else {
        greedy_matching(nodes.len(), &edges)
    };
    let pairs = PairSet::new(
        mate.iter()
            .enumerate()
            .filter_map(|(v, m)| m.filter(|&u| u > v).map(|u| (nodes[v], nodes[u]))),
    )?;
    Ok(PosteriorLinkage {
        pairs,
        estimator: EstimatorKind::Binder,
        loss_ratio: Some(loss_ratio),
        threshold: Some(tau),
        exact,
    })
}

/// Most probable maximal matching sets. Each record's modal partner set is
/// its most frequent partner across samples (possibly none); ties go to the
/// singleton set first, then to the lower partner index. A pair is kept
/// only when both records name each other, so the output is a matching.
pub fn mpmms_point_estimate(labels: &[Vec<u32>], data: &Dataset) -> Result<PosteriorLinkage> {
    check_samples(labels, data)?;
    let n = data.n_records();
    let mut counts: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); n];
    let mut alone = vec![0u64; n];
    for row in labels {
        for (r, p) in partners(row, data)?.into_iter().enumerate() {
            match p {
                Some(s) => *counts[r].entry(s).or_default() += 1,
                None => alone[r] += 1,
            }
        }
    }
    let modal: Vec<Option<usize>> = (0..n)
        .map(|r| {
            let mut best = None;
            let mut best_count = alone[r];
            // BTreeMap iterates partners in increasing index, so strict
            // comparison keeps the lowest index on ties.
            for (&s, &c) in &counts[r] {
                if c > best_count {
                    best = Some(s);
                    best_count = c;
                }
            }
            best
        })
        .collect();
    let pairs = PairSet::new(
        (0..n).filter_map(|r| modal[r].filter(|&s| s > r && modal[s] == Some(r)).map(|s| (data.record(r), data.record(s)))),
    )?;
    Ok(PosteriorLinkage {
        pairs,
        estimator: EstimatorKind::Mpmms,
        loss_ratio: None,
        threshold: None,
        exact: true,
    })
}
