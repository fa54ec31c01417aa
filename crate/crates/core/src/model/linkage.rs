use crate::data::{Dataset, PairSet, RecordRef};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Assignment of every record to a latent individual.
///
/// Clusters hold one record or two records from different files. Cluster
/// ids are always `0..n_clusters()` with no gaps; externally they are shown
/// as `1..=N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkageStructure {
    labels: Vec<u32>,
    clusters: Vec<[u32; 2]>,
    files: Vec<u32>,
}

impl LinkageStructure {
    /// Every record in its own cluster.
    pub fn singletons(data: &Dataset) -> Self {
        let n = data.n_records();
        LinkageStructure {
            labels: (0..n as u32).collect(),
            clusters: (0..n as u32).map(|r| [r, NONE]).collect(),
            files: (0..n).map(|g| data.record(g).file as u32).collect(),
        }
    }

    /// Singletons except for the given pairs.
    pub fn from_pairs(data: &Dataset, pairs: &PairSet) -> Result<Self> {
        pairs.check_against(&data.file_sizes())?;
        let mut labels = vec![NONE; data.n_records()];
        let mut clusters = Vec::with_capacity(data.n_records());
        for &(a, b) in pairs.pairs() {
            let (ga, gb) = (data.global(a), data.global(b));
            labels[ga] = clusters.len() as u32;
            labels[gb] = clusters.len() as u32;
            clusters.push([ga as u32, gb as u32]);
        }
        for (g, l) in labels.iter_mut().enumerate() {
            if *l == NONE {
                *l = clusters.len() as u32;
                clusters.push([g as u32, NONE]);
            }
        }
        Ok(LinkageStructure {
            labels,
            clusters,
            files: (0..data.n_records()).map(|g| data.record(g).file as u32).collect(),
        })
    }

    /// Builds from arbitrary integer labels (any ids), checking the
    /// singleton / cross-file pair constraint.
    pub fn from_labels(data: &Dataset, labels: &[usize]) -> Result<Self> {
        if labels.len() != data.n_records() {
            return Err(Error::Domain(format!(
                "{} labels for {} records",
                labels.len(),
                data.n_records()
            )));
        }
        let mut by_label: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (g, &l) in labels.iter().enumerate() {
            by_label.entry(l).or_default().push(g);
        }
        let mut pairs = Vec::new();
        for members in by_label.values() {
            match members.as_slice() {
                [_] => {}
                [a, b] => pairs.push((data.record(*a), data.record(*b))),
                _ => {
                    return Err(Error::Domain(format!(
                        "cluster with {} records violates the pair constraint",
                        members.len()
                    )))
                }
            }
        }
        let pairs = PairSet::new(pairs)?;
        Self::from_pairs(data, &pairs)
    }

    pub fn n_records(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    #[inline]
    pub fn label(&self, record: usize) -> usize {
        self.labels[record] as usize
    }

    #[inline]
    pub fn file_of(&self, record: usize) -> usize {
        self.files[record] as usize
    }

    /// Members of a cluster: the first record and an optional second one.
    #[inline]
    pub fn members(&self, cluster: usize) -> (usize, Option<usize>) {
        let [a, b] = self.clusters[cluster];
        (a as usize, (b != NONE).then_some(b as usize))
    }

    pub fn member_iter(&self, cluster: usize) -> impl Iterator<Item = usize> {
        let [a, b] = self.clusters[cluster];
        [a, b].into_iter().filter(|&x| x != NONE).map(|x| x as usize)
    }

    #[inline]
    pub fn is_singleton(&self, cluster: usize) -> bool {
        self.clusters[cluster][1] == NONE
    }

    /// The other record sharing `record`'s cluster, if any.
    #[inline]
    pub fn partner(&self, record: usize) -> Option<usize> {
        let [a, b] = self.clusters[self.labels[record] as usize];
        if b == NONE {
            None
        } else if a as usize == record {
            Some(b as usize)
        } else {
            Some(a as usize)
        }
    }

    /// Matched pairs as `(smaller, larger)` global indices, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .clusters
            .iter()
            .filter(|c| c[1] != NONE)
            .map(|c| (c[0].min(c[1]) as usize, c[0].max(c[1]) as usize))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn n_pairs(&self) -> usize {
        self.clusters.iter().filter(|c| c[1] != NONE).count()
    }

    /// Labels renumbered `1..=N` in order of first appearance, so equal
    /// partitions give equal label vectors.
    pub fn canonical_labels(&self) -> Vec<u32> {
        let mut map = vec![0u32; self.clusters.len()];
        let mut next = 0u32;
        self.labels
            .iter()
            .map(|&l| {
                let slot = &mut map[l as usize];
                if *slot == 0 {
                    next += 1;
                    *slot = next;
                }
                *slot
            })
            .collect()
    }

    pub fn record_pairs(&self, data: &Dataset) -> Vec<(RecordRef, RecordRef)> {
        self.pairs()
            .into_iter()
            .map(|(a, b)| (data.record(a), data.record(b)))
            .collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        for (c, &[a, b]) in self.clusters.iter().enumerate() {
            if a == NONE || self.labels[a as usize] as usize != c {
                return Err(Error::Domain(format!("cluster {c}: inconsistent first member")));
            }
            if b != NONE {
                if self.labels[b as usize] as usize != c {
                    return Err(Error::Domain(format!("cluster {c}: inconsistent second member")));
                }
                if self.files[a as usize] == self.files[b as usize] {
                    return Err(Error::Domain(format!("cluster {c} links two records of one file")));
                }
            }
        }
        let counted: usize = self.clusters.iter().map(|c| 1 + (c[1] != NONE) as usize).sum();
        if counted != self.labels.len() || self.labels.iter().any(|&l| l as usize >= self.clusters.len()) {
            return Err(Error::Domain("labels do not cover every record exactly once".into()));
        }
        Ok(())
    }

    // ---- structural edits; callers keep cluster-indexed data in sync ----

    /// Appends a new singleton cluster for `record`, which must currently be
    /// in a pair. Returns the new cluster id.
    pub(crate) fn detach(&mut self, record: usize) -> usize {
        let c = self.labels[record] as usize;
        let [a, b] = self.clusters[c];
        debug_assert!(b != NONE);
        let stay = if a as usize == record { b } else { a };
        self.clusters[c] = [stay, NONE];
        let new = self.clusters.len();
        self.clusters.push([record as u32, NONE]);
        self.labels[record] = new as u32;
        new
    }

    /// Moves `record` out of its pair and into singleton cluster `target`.
    pub(crate) fn move_to(&mut self, record: usize, target: usize) {
        let c = self.labels[record] as usize;
        let [a, b] = self.clusters[c];
        debug_assert!(b != NONE && self.clusters[target][1] == NONE);
        let stay = if a as usize == record { b } else { a };
        self.clusters[c] = [stay, NONE];
        self.clusters[target][1] = record as u32;
        self.labels[record] = target as u32;
    }

    /// Joins singleton `record` into singleton cluster `target`, deleting the
    /// record's old cluster by swapping the last cluster into its slot.
    /// Returns `(removed_slot, previous_index_of_moved_cluster)`.
    pub(crate) fn merge_into(&mut self, record: usize, target: usize) -> (usize, usize) {
        let c = self.labels[record] as usize;
        debug_assert!(self.clusters[c][1] == NONE && self.clusters[target][1] == NONE);
        self.clusters[target][1] = record as u32;
        self.labels[record] = target as u32;
        self.remove_slot(c)
    }

    fn remove_slot(&mut self, c: usize) -> (usize, usize) {
        let last = self.clusters.len() - 1;
        self.clusters.swap_remove(c);
        if c != last {
            for m in self.clusters[c] {
                if m != NONE {
                    self.labels[m as usize] = c as u32;
                }
            }
        }
        (c, last)
    }
}
