//! DIC and WAIC over per-unit log-likelihoods.
//!
//! A unit is one dyad of one file or one observed profile cell. Profile
//! cells enter with their distortion indicator summed out, and every unit is
//! conditional on the sampled latent state. Summaries are accumulated in a
//! single pass (running log-sum-exp, Welford mean and variance), so the full
//! samples-by-units matrix is only kept on request.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edge_loglik, Model, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSubset {
    #[default]
    All,
    Network,
    Profile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseLogLik {
    n_network: usize,
    n_profile: usize,
    n_samples: usize,
    lse: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    matrix: Option<Vec<f64>>,
}

impl PointwiseLogLik {
    pub fn new(n_network: usize, n_profile: usize, keep_matrix: bool) -> Self {
        let n = n_network + n_profile;
        PointwiseLogLik {
            n_network,
            n_profile,
            n_samples: 0,
            lse: vec![f64::NEG_INFINITY; n],
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            matrix: keep_matrix.then(Vec::new),
        }
    }

    /// Builds from explicit rows; the first `n_network` columns are dyads.
    pub fn from_rows(n_network: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n < n_network {
            return Err(Error::Domain("fewer columns than network units".into()));
        }
        let mut p = PointwiseLogLik::new(n_network, n - n_network, true);
        for r in rows {
            p.push(r)?;
        }
        Ok(p)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_units() {
            return Err(Error::Domain(format!(
                "pointwise row has {} units, expected {}",
                row.len(),
                self.n_units()
            )));
        }
        self.n_samples += 1;
        let s = self.n_samples as f64;
        for (i, &x) in row.iter().enumerate() {
            let a = self.lse[i];
            let m = a.max(x);
            self.lse[i] = if m == f64::NEG_INFINITY {
                m
            } else {
                m + ((a - m).exp() + (x - m).exp()).ln()
            };
            let d = x - self.mean[i];
            self.mean[i] += d / s;
            self.m2[i] += d * (x - self.mean[i]);
        }
        if let Some(m) = &mut self.matrix {
            m.extend_from_slice(row);
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_units(&self) -> usize {
        self.n_network + self.n_profile
    }

    pub fn n_network_units(&self) -> usize {
        self.n_network
    }

    pub fn n_profile_units(&self) -> usize {
        self.n_profile
    }

    /// Stored rows, if the matrix was kept.
    pub fn rows(&self) -> Option<impl Iterator<Item = &[f64]>> {
        let n = self.n_units().max(1);
        self.matrix.as_ref().map(|m| m.chunks(n))
    }

    fn units(&self, subset: UnitSubset) -> std::ops::Range<usize> {
        match subset {
            UnitSubset::All => 0..self.n_units(),
            UnitSubset::Network => 0..self.n_network,
            UnitSubset::Profile => self.n_network..self.n_units(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Domain("information criteria need at least two samples".into()));
        }
        Ok(())
    }

    /// Log pointwise predictive density summed over the subset.
    pub fn lppd(&self, subset: UnitSubset) -> f64 {
        let ln_s = (self.n_samples as f64).ln();
        self.units(subset).map(|i| self.lse[i] - ln_s).sum()
    }

    /// Posterior mean of the total log-likelihood over the subset.
    pub fn mean_loglik(&self, subset: UnitSubset) -> f64 {
        self.units(subset).map(|i| self.mean[i]).sum()
    }

    /// Sum over units of the per-unit log-likelihood variance (divisor S).
    pub fn variance_sum(&self, subset: UnitSubset) -> f64 {
        let s = self.n_samples as f64;
        self.units(subset).map(|i| self.m2[i] / s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    pub value: f64,
    pub mean_deviance: f64,
    pub plugin_deviance: f64,
    pub p_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub value: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// `DIC = D̄ + p_D`. The plug-in deviance uses the posterior mean of each
/// unit's probability, which stays meaningful when latent positions are
/// only identified up to rotation and cluster labels permute.
pub fn dic(pw: &PointwiseLogLik, subset: UnitSubset) -> Result<Dic> {
    pw.check()?;
    let mean_deviance = -2.0 * pw.mean_loglik(subset);
    let plugin_deviance = -2.0 * pw.lppd(subset);
    let p_d = mean_deviance - plugin_deviance;
    Ok(Dic {
        value: mean_deviance + p_d,
        mean_deviance,
        plugin_deviance,
        p_d,
    })
}

/// `WAIC = -2 (lppd - p_WAIC)` with `p_WAIC` the summed per-unit variances.
pub fn waic(pw: &PointwiseLogLik, subset: UnitSubset) -> Result<Waic> {
    pw.check()?;
    let lppd = pw.lppd(subset);
    let p_waic = pw.variance_sum(subset);
    Ok(Waic {
        value: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
    })
}

/// Information criteria for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub k: usize,
    pub subset: UnitSubset,
    pub n_samples: usize,
    pub dic: f64,
    pub p_dic: f64,
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
}

impl CriterionReport {
    pub fn new(k: usize, pw: &PointwiseLogLik, subset: UnitSubset) -> Result<Self> {
        let d = dic(pw, subset)?;
        let w = waic(pw, subset)?;
        Ok(CriterionReport {
            k,
            subset,
            n_samples: pw.n_samples(),
            dic: d.value,
            p_dic: d.p_d,
            waic: w.value,
            p_waic: w.p_waic,
            lppd: w.lppd,
        })
    }
}

/// Number of (network, profile) units the model contributes.
pub(crate) fn unit_counts(model: &Model) -> (usize, usize) {
    let net = if model.terms.network {
        (0..model.data.n_files())
            .map(|j| {
                let n = model.data.file_size(j);
                n * n.saturating_sub(1) / 2
            })
            .sum()
    } else {
        0
    };
    let prof = if model.terms.profile {
        (0..model.n_fields()).map(|l| model.observed_cells(l)).sum()
    } else {
        0
    };
    (net, prof)
}

/// Per-unit log-likelihoods of the current state: dyads file by file in
/// `(a, b)` order with `a < b`, then observed cells record by record.
pub fn pointwise_loglik(model: &Model, state: &ModelState, out: &mut Vec<f64>) {
    out.clear();
    if model.terms.network {
        for j in 0..model.data.n_files() {
            let adj = &model.data.networks[j];
            let range = model.data.file_range(j);
            let beta = state.globals.beta[j];
            for a in range.clone() {
                let ua = state.latent.position(state.linkage.label(a));
                for b in a + 1..range.end {
                    let ub = state.latent.position(state.linkage.label(b));
                    let d: f64 = ua.iter().zip(ub).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    out.push(edge_loglik(adj.has_edge(a - range.start, b - range.start), beta - d));
                }
            }
        }
    }
    if model.terms.profile {
        for r in 0..model.n_records() {
            let c = state.linkage.label(r);
            for l in 0..model.n_fields() {
                if model.cell(r, l).is_some() {
                    out.push(model.cell_marginal(&state.globals, r, l, state.latent.profile(c, l)));
                }
            }
        }
    }
}
