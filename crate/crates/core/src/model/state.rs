use super::linkage::LinkageStructure;
use crate::error::{Error, Result};

/// True profiles and latent positions, one row per latent individual.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPopulation {
    n_fields: usize,
    k: usize,
    profiles: Vec<u32>,
    positions: Vec<f64>,
}

impl LatentPopulation {
    pub fn new(n_fields: usize, k: usize) -> Self {
        LatentPopulation {
            n_fields,
            k,
            profiles: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    #[inline]
    pub fn profile(&self, n: usize, field: usize) -> usize {
        self.profiles[n * self.n_fields + field] as usize
    }

    pub fn profile_row(&self, n: usize) -> &[u32] {
        &self.profiles[n * self.n_fields..(n + 1) * self.n_fields]
    }

    #[inline]
    pub fn set_profile(&mut self, n: usize, field: usize, level: usize) {
        self.profiles[n * self.n_fields + field] = level as u32;
    }

    #[inline]
    pub fn position(&self, n: usize) -> &[f64] {
        &self.positions[n * self.k..(n + 1) * self.k]
    }

    #[inline]
    pub fn position_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.positions[n * self.k..(n + 1) * self.k]
    }

    pub fn push(&mut self, profile: &[u32], position: &[f64]) {
        debug_assert_eq!(profile.len(), self.n_fields);
        debug_assert_eq!(position.len(), self.k);
        self.profiles.extend_from_slice(profile);
        self.positions.extend_from_slice(position);
    }

    pub fn set_row(&mut self, n: usize, profile: &[u32], position: &[f64]) {
        self.profiles[n * self.n_fields..(n + 1) * self.n_fields].copy_from_slice(profile);
        self.position_mut(n).copy_from_slice(position);
    }

    /// Removes row `n`, moving the last row into its place.
    pub fn swap_remove(&mut self, n: usize) {
        let last = self.len() - 1;
        if n != last {
            let (l, k) = (self.n_fields, self.k);
            self.profiles.copy_within(last * l..(last + 1) * l, n * l);
            self.positions.copy_within(last * k..(last + 1) * k, n * k);
        }
        self.profiles.truncate(last * self.n_fields);
        self.positions.truncate(last * self.k);
    }

    pub fn squared_norm_sum(&self) -> f64 {
        self.positions.iter().map(|x| x * x).sum()
    }
}

/// Per-record, per-field distortion indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistortionFlags {
    n_fields: usize,
    w: Vec<bool>,
}

impl DistortionFlags {
    pub fn new(n_records: usize, n_fields: usize) -> Self {
        DistortionFlags {
            n_fields,
            w: vec![false; n_records * n_fields],
        }
    }

    #[inline]
    pub fn get(&self, record: usize, field: usize) -> bool {
        self.w[record * self.n_fields + field]
    }

    #[inline]
    pub fn set(&mut self, record: usize, field: usize, value: bool) {
        self.w[record * self.n_fields + field] = value;
    }
}

/// Scalar and vector parameters shared across records.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalParams {
    /// Per-file intercepts.
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Per-field level probabilities (unused for string fields).
    pub theta: Vec<Vec<f64>>,
    /// Per-field distortion probabilities.
    pub psi: Vec<f64>,
}

/// Every latent quantity of one MCMC state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub linkage: LinkageStructure,
    pub latent: LatentPopulation,
    pub flags: DistortionFlags,
    pub globals: GlobalParams,
}

impl ModelState {
    pub fn n_clusters(&self) -> usize {
        self.linkage.n_clusters()
    }

    /// Splits `record` off its pair into a new cluster with the given latents.
    pub(crate) fn detach_record(&mut self, record: usize, profile: &[u32], position: &[f64]) {
        let c = self.linkage.detach(record);
        debug_assert_eq!(c, self.latent.len());
        self.latent.push(profile, position);
    }

    /// Moves `record` from its pair into the singleton cluster `target`.
    pub(crate) fn move_record(&mut self, record: usize, target: usize) {
        self.linkage.move_to(record, target);
    }

    /// Joins singleton `record` into singleton `target`, dropping its cluster.
    pub(crate) fn merge_record(&mut self, record: usize, target: usize) {
        let (removed, _) = self.linkage.merge_into(record, target);
        self.latent.swap_remove(removed);
    }

    /// Structural checks that do not need the data.
    pub fn validate_structure(&self) -> Result<()> {
        self.linkage.validate()?;
        if self.latent.len() != self.linkage.n_clusters() {
            return Err(Error::Domain(format!(
                "{} latent rows for {} clusters",
                self.latent.len(),
                self.linkage.n_clusters()
            )));
        }
        if !(self.globals.sigma2 > 0.0) {
            return Err(Error::Domain("sigma2 must be positive".into()));
        }
        for t in &self.globals.theta {
            if !t.is_empty() && (t.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain("theta does not sum to one".into()));
            }
        }
        Ok(())
    }
}
