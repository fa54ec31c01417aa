//! Multi-file profile + network datasets.
//!
//! Record indices are 0-based inside the library. Every file format uses
//! 1-based indices; conversion happens at the I/O boundary only.

mod io;
mod stats;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_dataset, load_network, load_pairs, load_profiles, read_pairs_raw, write_network,
    write_pairs, write_profiles, ProfileSet,
};
pub use stats::{summary_statistics, GraphSummary};
pub use synth::{generate_synthetic, SynthField, SyntheticDataset, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Categorical,
    #[serde(alias = "string_valued", rename = "string")]
    StringValued,
}

/// One profile field and its pooled empirical distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Distinct observed values, sorted lexicographically.
    pub levels: Vec<String>,
    /// Relative frequency of each level over all non-missing pooled cells.
    pub empirical_freq: Vec<f64>,
}

impl FieldSpec {
    /// Builds the spec from pooled observed values. Missing cells are skipped.
    pub fn from_values<'a, I>(name: &str, kind: FieldKind, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_default() += 1;
        }
        if counts.is_empty() {
            return Err(Error::Dataset(format!("field `{name}` has no observed values")));
        }
        let total: usize = counts.values().sum();
        let levels = counts.keys().map(|s| s.to_string()).collect();
        let empirical_freq = counts.values().map(|&c| c as f64 / total as f64).collect();
        Ok(FieldSpec {
            name: name.to_string(),
            kind,
            levels,
            empirical_freq,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, value: &str) -> Option<usize> {
        self.levels
            .binary_search_by(|l| l.as_str().cmp(value))
            .ok()
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Dataset(format!("field `{}` has no levels", self.name)));
        }
        if self.levels.len() != self.empirical_freq.len() {
            return Err(Error::Dataset(format!(
                "field `{}`: {} levels but {} frequencies",
                self.name,
                self.levels.len(),
                self.empirical_freq.len()
            )));
        }
        let distinct: BTreeSet<&String> = self.levels.iter().collect();
        if distinct.len() != self.levels.len() {
            return Err(Error::Dataset(format!("field `{}` has duplicate levels", self.name)));
        }
        if self.empirical_freq.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Dataset(format!(
                "field `{}` has a non-positive level frequency",
                self.name
            )));
        }
        let sum: f64 = self.empirical_freq.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Dataset(format!(
                "field `{}` frequencies sum to {sum}",
                self.name
            )));
        }
        Ok(())
    }
}

/// Profile rows of one file, stored as level indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub file_id: usize,
    pub record_ids: Vec<String>,
    n_fields: usize,
    cells: Vec<Option<u32>>,
}

impl ProfileTable {
    pub fn new(file_id: usize, record_ids: Vec<String>, rows: Vec<Vec<Option<usize>>>) -> Result<Self> {
        if record_ids.len() != rows.len() {
            return Err(Error::Dataset(format!(
                "file {}: {} record ids for {} rows",
                file_id + 1,
                record_ids.len(),
                rows.len()
            )));
        }
        let n_fields = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * n_fields);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_fields {
                return Err(Error::Dataset(format!(
                    "file {}: row {} has {} fields, expected {n_fields}",
                    file_id + 1,
                    i + 1,
                    row.len()
                )));
            }
            cells.extend(row.into_iter().map(|c| c.map(|v| v as u32)));
        }
        Ok(ProfileTable {
            file_id,
            record_ids,
            n_fields,
            cells,
        })
    }

    /// A table without profile fields, used when only network data exist.
    pub fn empty(file_id: usize, n_records: usize) -> Self {
        ProfileTable {
            file_id,
            record_ids: (1..=n_records).map(|i| i.to_string()).collect(),
            n_fields: 0,
            cells: Vec::new(),
        }
    }

    pub fn n_records(&self) -> usize {
        self.record_ids.len()
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    #[inline]
    pub fn cell(&self, record: usize, field: usize) -> Option<usize> {
        self.cells[record * self.n_fields + field].map(|v| v as usize)
    }

    pub fn row(&self, record: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        self.cells[record * self.n_fields..(record + 1) * self.n_fields]
            .iter()
            .map(|c| c.map(|v| v as usize))
    }
}

/// Undirected binary graph on the records of one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub file_id: usize,
    n_actors: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    bits: Vec<u64>,
}

impl Adjacency {
    /// Builds a graph from 0-based pairs. Duplicates and reversed pairs
    /// collapse into one edge.
    pub fn new(file_id: usize, n_actors: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a >= n_actors || b >= n_actors {
                return Err(Error::Dataset(format!(
                    "file {}: edge ({}, {}) out of range for {n_actors} actors",
                    file_id + 1,
                    a + 1,
                    b + 1
                )));
            }
            if a == b {
                return Err(Error::Dataset(format!(
                    "file {}: self-loop on actor {}",
                    file_id + 1,
                    a + 1
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n_actors];
        let words = (n_actors * n_actors).div_ceil(64);
        let mut bits = vec![0u64; words];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
            for idx in [a * n_actors + b, b * n_actors + a] {
                bits[idx / 64] |= 1 << (idx % 64);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Adjacency {
            file_id,
            n_actors,
            edges,
            neighbors,
            bits,
        })
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let idx = a * self.n_actors + b;
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.neighbors[a].len()
    }

    pub fn density(&self) -> f64 {
        if self.n_actors < 2 {
            return 0.0;
        }
        let slots = self.n_actors * (self.n_actors - 1) / 2;
        self.edges.len() as f64 / slots as f64
    }
}

/// A record addressed by file and row (both 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordRef {
    pub file: usize,
    pub index: usize,
}

impl RecordRef {
    pub fn new(file: usize, index: usize) -> Self {
        RecordRef { file, index }
    }
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.file + 1, self.index + 1)
    }
}

/// A set of cross-file record pairs where every record appears at most once.
/// Used both for ground truth and for anchors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pairs: Vec<(RecordRef, RecordRef)>,
}

pub type GroundTruth = PairSet;
pub type AnchorSet = PairSet;

impl PairSet {
    pub fn new(pairs: impl IntoIterator<Item = (RecordRef, RecordRef)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (a, b) in pairs {
            if a.file == b.file {
                return Err(Error::Domain(format!("pair {a}-{b} lies within one file")));
            }
            for r in [a, b] {
                if !seen.insert(r) {
                    return Err(Error::Domain(format!("record {r} appears in more than one pair")));
                }
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort();
        Ok(PairSet { pairs: out })
    }

    pub fn pairs(&self) -> &[(RecordRef, RecordRef)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: RecordRef, b: RecordRef) -> bool {
        self.pairs.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn check_against(&self, file_sizes: &[usize]) -> Result<()> {
        for &(a, b) in &self.pairs {
            for r in [a, b] {
                if r.file >= file_sizes.len() || r.index >= file_sizes[r.file] {
                    return Err(Error::DanglingRecord {
                        file: r.file + 1,
                        index: r.index + 1,
                    });
                }
            }
        }
        Ok(())
    }

    /// Subset of the pairs, picked uniformly without replacement.
    pub fn sample_fraction<R: rand::Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> PairSet {
        use rand::seq::index::sample;
        let n = ((fraction.clamp(0.0, 1.0) * self.pairs.len() as f64).round() as usize).min(self.pairs.len());
        let mut picked: Vec<_> = sample(rng, self.pairs.len(), n)
            .into_iter()
            .map(|i| self.pairs[i])
            .collect();
        picked.sort();
        PairSet { pairs: picked }
    }
}

/// Profiles and graphs for every file, sharing one ordered field list.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub fields: Vec<FieldSpec>,
    pub profiles: Vec<ProfileTable>,
    pub networks: Vec<Adjacency>,
    offsets: Vec<usize>,
}

impl Dataset {
    pub fn new(fields: Vec<FieldSpec>, profiles: Vec<ProfileTable>, networks: Vec<Adjacency>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Dataset("no files".into()));
        }
        if profiles.len() != networks.len() {
            return Err(Error::Dataset(format!(
                "{} profile tables but {} networks",
                profiles.len(),
                networks.len()
            )));
        }
        for f in &fields {
            f.validate()?;
        }
        let mut offsets = Vec::with_capacity(profiles.len() + 1);
        offsets.push(0);
        for (j, (p, y)) in profiles.iter().zip(&networks).enumerate() {
            if p.n_fields() != fields.len() && !(p.n_records() == 0 && p.n_fields() == 0) {
                return Err(Error::Dataset(format!(
                    "file {} has {} fields, dataset declares {}",
                    j + 1,
                    p.n_fields(),
                    fields.len()
                )));
            }
            if p.n_records() != y.n_actors() {
                return Err(Error::Dataset(format!(
                    "file {}: {} profile rows but {} network actors",
                    j + 1,
                    p.n_records(),
                    y.n_actors()
                )));
            }
            for i in 0..p.n_records() {
                for (l, field) in fields.iter().enumerate() {
                    if let Some(v) = p.cell(i, l) {
                        if v >= field.n_levels() {
                            return Err(Error::Dataset(format!(
                                "file {}, record {}: level {v} out of range for field `{}`",
                                j + 1,
                                i + 1,
                                field.name
                            )));
                        }
                    }
                }
            }
            offsets.push(offsets[j] + p.n_records());
        }
        Ok(Dataset {
            fields,
            profiles,
            networks,
            offsets,
        })
    }

    /// Builds a dataset from raw string cells, deriving the pooled field specs.
    pub fn from_raw(
        field_names: &[String],
        kinds: &[FieldKind],
        files: Vec<(Vec<String>, Vec<Vec<Option<String>>>)>,
        networks: Vec<Adjacency>,
    ) -> Result<Self> {
        let mut fields = Vec::with_capacity(field_names.len());
        for (l, (name, &kind)) in field_names.iter().zip(kinds).enumerate() {
            let values = files
                .iter()
                .flat_map(|(_, rows)| rows.iter().filter_map(move |r| r[l].as_deref()));
            fields.push(FieldSpec::from_values(name, kind, values)?);
        }
        let mut tables = Vec::with_capacity(files.len());
        for (j, (ids, rows)) in files.into_iter().enumerate() {
            let rows = rows
                .into_iter()
                .map(|r| {
                    r.iter()
                        .zip(&fields)
                        .map(|(c, f)| c.as_deref().and_then(|v| f.level_index(v)))
                        .collect()
                })
                .collect();
            let table = if field_names.is_empty() {
                ProfileTable::empty(j, ids.len())
            } else {
                ProfileTable::new(j, ids, rows)?
            };
            tables.push(table);
        }
        Dataset::new(fields, tables, networks)
    }

    pub fn n_files(&self) -> usize {
        self.profiles.len()
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn n_records(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn file_size(&self, file: usize) -> usize {
        self.profiles[file].n_records()
    }

    pub fn file_sizes(&self) -> Vec<usize> {
        self.profiles.iter().map(ProfileTable::n_records).collect()
    }

    /// Global 0-based position of a record across all files.
    #[inline]
    pub fn global(&self, r: RecordRef) -> usize {
        self.offsets[r.file] + r.index
    }

    pub fn record(&self, global: usize) -> RecordRef {
        let file = self.offsets.partition_point(|&o| o <= global) - 1;
        RecordRef::new(file, global - self.offsets[file])
    }

    pub fn file_range(&self, file: usize) -> std::ops::Range<usize> {
        self.offsets[file]..self.offsets[file + 1]
    }

    #[inline]
    pub fn cell(&self, global: usize, field: usize) -> Option<usize> {
        let r = self.record(global);
        self.profiles[r.file].cell(r.index, field)
    }

    pub fn validate_ref(&self, r: RecordRef) -> Result<()> {
        if r.file < self.n_files() && r.index < self.file_size(r.file) {
            Ok(())
        } else {
            Err(Error::DanglingRecord {
                file: r.file + 1,
                index: r.index + 1,
            })
        }
    }

    /// Number of cross-file record pairs, the universe for pairwise metrics.
    pub fn n_cross_pairs(&self) -> u64 {
        let sizes = self.file_sizes();
        let mut total = 0u64;
        for a in 0..sizes.len() {
            for b in a + 1..sizes.len() {
                total += (sizes[a] * sizes[b]) as u64;
            }
        }
        total
    }

    /// Replaces profile cells and graphs while keeping the field specs.
    /// Used when re-simulating data from a fixed model.
    pub fn with_observations(&self, profiles: Vec<ProfileTable>, networks: Vec<Adjacency>) -> Result<Self> {
        Dataset::new(self.fields.clone(), profiles, networks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_spec_levels_and_frequencies() {
        let f = FieldSpec::from_values("state", FieldKind::Categorical, ["CA", "CA", "NY", "MI"]).unwrap();
        assert_eq!(f.levels, vec!["CA", "MI", "NY"]);
        assert_eq!(f.empirical_freq, vec![0.5, 0.25, 0.25]);
        assert_eq!(f.level_index("NY"), Some(2));
        assert_eq!(f.level_index("TX"), None);
    }

    #[test]
    fn adjacency_dedups_and_rejects_loops() {
        let g = Adjacency::new(0, 3, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(g.has_edge(1, 0) && g.has_edge(0, 1) && !g.has_edge(1, 2));
        assert!(Adjacency::new(0, 3, [(2, 2)]).is_err());
        assert!(Adjacency::new(0, 3, [(0, 3)]).is_err());
    }

    #[test]
    fn pair_set_rejects_reuse_and_same_file() {
        let a = RecordRef::new(0, 0);
        let b = RecordRef::new(1, 0);
        let c = RecordRef::new(1, 1);
        assert!(PairSet::new([(a, b)]).is_ok());
        assert!(PairSet::new([(a, b), (a, c)]).is_err());
        assert!(PairSet::new([(b, c)]).is_err());
        let p = PairSet::new([(b, a)]).unwrap();
        assert!(p.contains(a, b));
        assert!(p.check_against(&[1, 1]).is_ok());
        assert!(matches!(p.check_against(&[1]), Err(Error::DanglingRecord { .. })));
    }

    #[test]
    fn global_indexing_round_trips() {
        let tables = vec![ProfileTable::empty(0, 2), ProfileTable::empty(1, 3)];
        let nets = vec![Adjacency::new(0, 2, []).unwrap(), Adjacency::new(1, 3, []).unwrap()];
        let d = Dataset::new(vec![], tables, nets).unwrap();
        assert_eq!(d.n_records(), 5);
        for g in 0..5 {
            assert_eq!(d.global(d.record(g)), g);
        }
        assert_eq!(d.record(2), RecordRef::new(1, 0));
        assert_eq!(d.n_cross_pairs(), 6);
    }
}
