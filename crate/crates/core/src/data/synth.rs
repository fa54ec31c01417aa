use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Adjacency, Dataset, FieldKind, PairSet, RecordRef};
use crate::error::{Error, Result};
use crate::model::edge_probability;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthField {
    pub name: String,
    #[serde(default = "default_kind")]
    pub kind: FieldKind,
    /// Number of latent levels the truth is drawn from.
    pub levels: usize,
    /// Distortion probability.
    pub psi: f64,
}

fn default_kind() -> FieldKind {
    FieldKind::Categorical
}

/// Parameters for forward simulation of the linkage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub file_sizes: Vec<usize>,
    /// Latent population size. When absent it follows from `match_fraction`.
    #[serde(default)]
    pub n_latent: Option<usize>,
    /// Fraction of all records that belong to a cross-file pair.
    #[serde(default)]
    pub match_fraction: f64,
    #[serde(default)]
    pub fields: Vec<SynthField>,
    pub k: usize,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Give every latent individual its own level in every field
    /// (requires `levels >= N`).
    #[serde(default)]
    pub distinct_profiles: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub truth: PairSet,
    pub n_latent: usize,
    /// True latent individual of every record (global order, 0-based).
    pub labels: Vec<usize>,
    /// True latent positions, one row of length `k` per individual.
    pub positions: Vec<Vec<f64>>,
}

impl SyntheticSpec {
    fn n_pairs(&self) -> Result<usize> {
        let total: usize = self.file_sizes.iter().sum();
        let pairs = match self.n_latent {
            Some(n) => {
                if n > total {
                    return Err(Error::Infeasible(format!("N = {n} exceeds the {total} records")));
                }
                total - n
            }
            None => {
                if !(0.0..=1.0).contains(&self.match_fraction) {
                    return Err(Error::Infeasible(format!(
                        "match fraction {} outside [0, 1]",
                        self.match_fraction
                    )));
                }
                (self.match_fraction * total as f64 / 2.0).round() as usize
            }
        };
        let max_file = self.file_sizes.iter().copied().max().unwrap_or(0);
        if pairs > total / 2 || pairs > total - max_file {
            return Err(Error::Infeasible(format!(
                "{pairs} cross-file pairs cannot be formed from files of sizes {:?}",
                self.file_sizes
            )));
        }
        Ok(pairs)
    }

    fn validate(&self) -> Result<()> {
        if self.file_sizes.is_empty() || self.file_sizes.contains(&0) {
            return Err(Error::Config("every file needs at least one record".into()));
        }
        if self.beta.len() != self.file_sizes.len() {
            return Err(Error::Config("one beta per file is required".into()));
        }
        if self.k == 0 || !(self.sigma2 > 0.0) {
            return Err(Error::Config("k >= 1 and sigma2 > 0 are required".into()));
        }
        for f in &self.fields {
            if f.levels == 0 || !(0.0..=1.0).contains(&f.psi) {
                return Err(Error::Config(format!("field `{}`: bad levels or psi", f.name)));
            }
        }
        Ok(())
    }
}

/// Draws a linkage structure with the requested number of pairs, then latent
/// profiles, distortions, positions and finally the observed data.
///
/// With two files the pair set is uniform among all matchings of that size.
/// With more files pairs are drawn sequentially, which is close to but not
/// exactly uniform.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let n_pairs = spec.n_pairs()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = &spec.file_sizes;
    let n_files = sizes.len();
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(sizes.iter().scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();
    let total = offsets[n_files];

    let pairs = draw_pairs(sizes, n_pairs, &mut rng);
    let mut labels = vec![usize::MAX; total];
    let mut n_latent = 0;
    for &(a, b) in &pairs {
        labels[offsets[a.file] + a.index] = n_latent;
        labels[offsets[b.file] + b.index] = n_latent;
        n_latent += 1;
    }
    for l in labels.iter_mut().filter(|l| **l == usize::MAX) {
        *l = n_latent;
        n_latent += 1;
    }

    // latent truths
    let mut truth_values: Vec<Vec<usize>> = Vec::with_capacity(spec.fields.len());
    let mut pools: Vec<Vec<String>> = Vec::with_capacity(spec.fields.len());
    for f in &spec.fields {
        if spec.distinct_profiles && f.levels < n_latent {
            return Err(Error::Infeasible(format!(
                "field `{}` has {} levels for {n_latent} distinct individuals",
                f.name, f.levels
            )));
        }
        let pool = level_pool(f, &mut rng);
        let vals: Vec<usize> = if spec.distinct_profiles {
            let mut perm: Vec<usize> = (0..f.levels).collect();
            perm.shuffle(&mut rng);
            perm.truncate(n_latent);
            perm
        } else {
            (0..n_latent).map(|_| rng.random_range(0..f.levels)).collect()
        };
        truth_values.push(vals);
        pools.push(pool);
    }

    let normal = Normal::new(0.0, spec.sigma2.sqrt()).expect("positive sd");
    let positions: Vec<Vec<f64>> = (0..n_latent)
        .map(|_| (0..spec.k).map(|_| normal.sample(&mut rng)).collect())
        .collect();

    // observed profiles
    let mut files = Vec::with_capacity(n_files);
    for j in 0..n_files {
        let mut ids = Vec::with_capacity(sizes[j]);
        let mut rows = Vec::with_capacity(sizes[j]);
        for i in 0..sizes[j] {
            let n = labels[offsets[j] + i];
            ids.push(format!("f{}r{}", j + 1, i + 1));
            let row = spec
                .fields
                .iter()
                .enumerate()
                .map(|(l, f)| {
                    let truth = &pools[l][truth_values[l][n]];
                    let distorted = rng.random::<f64>() < f.psi;
                    Some(if !distorted {
                        truth.clone()
                    } else {
                        match f.kind {
                            FieldKind::Categorical => pools[l][rng.random_range(0..f.levels)].clone(),
                            FieldKind::StringValued => mutate_string(truth, &mut rng),
                        }
                    })
                })
                .collect();
            rows.push(row);
        }
        files.push((ids, rows));
    }

    // networks
    let mut networks = Vec::with_capacity(n_files);
    for j in 0..n_files {
        let mut edges = Vec::new();
        for a in 0..sizes[j] {
            for b in a + 1..sizes[j] {
                let ua = &positions[labels[offsets[j] + a]];
                let ub = &positions[labels[offsets[j] + b]];
                if rng.random::<f64>() < edge_probability(spec.beta[j], ua, ub) {
                    edges.push((a, b));
                }
            }
        }
        networks.push(Adjacency::new(j, sizes[j], edges)?);
    }

    let names: Vec<String> = spec.fields.iter().map(|f| f.name.clone()).collect();
    let kinds: Vec<FieldKind> = spec.fields.iter().map(|f| f.kind).collect();
    let dataset = Dataset::from_raw(&names, &kinds, files, networks)?;
    Ok(SyntheticDataset {
        dataset,
        truth: PairSet::new(pairs)?,
        n_latent,
        labels,
        positions,
    })
}

fn draw_pairs<R: Rng>(sizes: &[usize], n_pairs: usize, rng: &mut R) -> Vec<(RecordRef, RecordRef)> {
    if n_pairs == 0 {
        return Vec::new();
    }
    if sizes.len() == 2 {
        let a = rand::seq::index::sample(rng, sizes[0], n_pairs).into_vec();
        let b = rand::seq::index::sample(rng, sizes[1], n_pairs).into_vec();
        return a
            .into_iter()
            .zip(b)
            .map(|(i, k)| (RecordRef::new(0, i), RecordRef::new(1, k)))
            .collect();
    }
    let mut free: Vec<Vec<usize>> = sizes.iter().map(|&s| (0..s).collect()).collect();
    let mut out = Vec::with_capacity(n_pairs);
    while out.len() < n_pairs {
        let remaining: usize = free.iter().map(Vec::len).sum();
        let fa = pick_weighted(&free, None, remaining, rng);
        let rest = remaining - free[fa].len();
        let fb = pick_weighted(&free, Some(fa), rest, rng);
        // keep the remaining demand satisfiable
        let mut after: Vec<usize> = free.iter().map(Vec::len).collect();
        after[fa] -= 1;
        after[fb] -= 1;
        let r: usize = after.iter().sum();
        let need = n_pairs - out.len() - 1;
        if need > r / 2 || need > r - after.iter().max().unwrap() {
            continue;
        }
        let ka = rng.random_range(0..free[fa].len());
        let ia = free[fa].swap_remove(ka);
        let kb = rng.random_range(0..free[fb].len());
        let ib = free[fb].swap_remove(kb);
        out.push((RecordRef::new(fa, ia), RecordRef::new(fb, ib)));
    }
    out
}

fn pick_weighted<R: Rng>(free: &[Vec<usize>], skip: Option<usize>, total: usize, rng: &mut R) -> usize {
    let mut k = rng.random_range(0..total);
    for (f, list) in free.iter().enumerate() {
        if Some(f) == skip {
            continue;
        }
        if k < list.len() {
            return f;
        }
        k -= list.len();
    }
    unreachable!("weighted pick past the end")
}

fn level_pool<R: Rng>(field: &SynthField, rng: &mut R) -> Vec<String> {
    let width = field.levels.to_string().len();
    match field.kind {
        FieldKind::Categorical => (0..field.levels).map(|m| format!("v{m:0width$}")).collect(),
        FieldKind::StringValued => {
            let mut seen = std::collections::BTreeSet::new();
            while seen.len() < field.levels {
                let s: String = (0..8).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect();
                seen.insert(s);
            }
            let mut pool: Vec<String> = seen.into_iter().collect();
            pool.shuffle(rng);
            pool
        }
    }
}

/// One random character substitution.
fn mutate_string<R: Rng>(s: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return "a".into();
    }
    let pos = rng.random_range(0..chars.len());
    let old = chars[pos];
    let mut c = old;
    while c == old {
        c = (b'a' + rng.random_range(0..26u8)) as char;
    }
    chars[pos] = c;
    chars.into_iter().collect()
}
