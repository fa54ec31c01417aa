use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, FieldKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
}

/// Normalizer used for string-field distortion.
///
/// `Weighted` makes the distortion kernel a proper distribution over the
/// observed support (`h(t) = 1 / Σ_s freq(s) exp(-λ d(s, t))`). `Unweighted`
/// drops the frequencies from the normalizer (`h(t) = 1 / Σ_s exp(-λ d(s, t))`),
/// which is cheaper to explain but leaves the kernel unnormalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StringNormalization {
    #[default]
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// Vector of ones.
    Ones,
    /// Empirical frequencies of the field.
    Empirical,
}

/// Known hyperparameters of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Prior sd of each file intercept.
    pub omega: Vec<f64>,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Dirichlet concentration per field (categorical fields) or the fixed
    /// prior over latent values (string fields).
    pub alpha: Vec<Vec<f64>>,
    pub a_psi: Vec<f64>,
    pub b_psi: Vec<f64>,
    pub lambda: f64,
    pub k: usize,
    pub link: Link,
    pub string_norm: StringNormalization,
}

/// Flat key-value overrides; anything left out takes its default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alpha_mode: BTreeMap<String, AlphaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string_norm: Option<StringNormalization>,
}

pub const DEFAULT_OMEGA: f64 = 100.0;
pub const DEFAULT_A_PSI: f64 = 1.0;
pub const DEFAULT_B_PSI: f64 = 99.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_CV_SIGMA: f64 = 0.5;

/// Inverse-gamma `(shape, scale)` for `sigma²` centred on the space-per-node
/// heuristic `E = √I/(√I-2) · π^{K/2}/Γ(K/2+1) · I^{2/K}` with the given
/// coefficient of variation.
pub fn elicit_sigma_prior(i_total: usize, k: usize, cv: f64) -> Result<(f64, f64)> {
    let root = (i_total as f64).sqrt();
    if root <= 2.0 {
        return Err(Error::Domain(format!(
            "sigma prior elicitation needs more than 4 records, got {i_total}"
        )));
    }
    if k == 0 || !(cv > 0.0) {
        return Err(Error::Domain("K >= 1 and cv > 0 are required".into()));
    }
    let kf = k as f64;
    let ln_ball = 0.5 * kf * PI.ln() - ln_gamma(0.5 * kf + 1.0);
    let mean = root / (root - 2.0) * (ln_ball + 2.0 / kf * (i_total as f64).ln()).exp();
    let a = 2.0 + 1.0 / (cv * cv);
    Ok((a, mean * (a - 1.0)))
}

impl HyperParams {
    /// Fills every hyperparameter, applying overrides from `cfg`.
    pub fn resolve(data: &Dataset, k: usize, cfg: &HyperConfig) -> Result<Self> {
        let k = cfg.k.unwrap_or(k);
        for name in cfg.alpha_mode.keys() {
            if !data.fields.iter().any(|f| &f.name == name) {
                return Err(Error::Config(format!("alpha_mode for unknown field `{name}`")));
            }
        }
        let cv = cfg.cv_sigma.unwrap_or(DEFAULT_CV_SIGMA);
        let (a_sigma, b_sigma) = match (cfg.a_sigma, cfg.b_sigma) {
            (Some(a), Some(b)) => (a, b),
            (a, b) => {
                let (ea, eb) = elicit_sigma_prior(data.n_records(), k, cv)?;
                (a.unwrap_or(ea), b.unwrap_or(eb))
            }
        };
        let alpha = data
            .fields
            .iter()
            .map(|f| {
                let mode = cfg.alpha_mode.get(&f.name).copied().unwrap_or(match f.kind {
                    FieldKind::Categorical => AlphaMode::Ones,
                    FieldKind::StringValued => AlphaMode::Empirical,
                });
                match mode {
                    AlphaMode::Ones => vec![1.0; f.n_levels()],
                    AlphaMode::Empirical => f.empirical_freq.clone(),
                }
            })
            .collect();
        let l = data.n_fields();
        let h = HyperParams {
            omega: vec![cfg.omega.unwrap_or(DEFAULT_OMEGA); data.n_files()],
            a_sigma,
            b_sigma,
            alpha,
            a_psi: vec![cfg.a_psi.unwrap_or(DEFAULT_A_PSI); l],
            b_psi: vec![cfg.b_psi.unwrap_or(DEFAULT_B_PSI); l],
            lambda: cfg.lambda.unwrap_or(DEFAULT_LAMBDA),
            k,
            link: Link::Logit,
            string_norm: cfg.string_norm.unwrap_or_default(),
        };
        h.validate(data)?;
        Ok(h)
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.omega.len() != data.n_files() || !self.omega.iter().all(|&w| pos(w)) {
            return Err(Error::Config("omega must be positive, one per file".into()));
        }
        if !pos(self.a_sigma) || !pos(self.b_sigma) {
            return Err(Error::Config("a_sigma and b_sigma must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !pos(self.lambda) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.alpha.len() != data.n_fields() || self.a_psi.len() != data.n_fields() || self.b_psi.len() != data.n_fields() {
            return Err(Error::Config("one alpha, a_psi and b_psi per field".into()));
        }
        for (f, a) in data.fields.iter().zip(&self.alpha) {
            if a.len() != f.n_levels() || !a.iter().all(|&x| pos(x)) {
                return Err(Error::Config(format!("alpha for `{}` must be positive, length {}", f.name, f.n_levels())));
            }
        }
        if !self.a_psi.iter().chain(&self.b_psi).all(|&x| pos(x)) {
            return Err(Error::Config("a_psi and b_psi must be positive".into()));
        }
        Ok(())
    }

    /// Explicit key-value form. Per-file `omega` collapses to its first entry.
    pub fn to_config(&self, data: &Dataset) -> HyperConfig {
        let alpha_mode = data
            .fields
            .iter()
            .zip(&self.alpha)
            .map(|(f, a)| {
                let mode = if a.iter().all(|&x| x == 1.0) {
                    AlphaMode::Ones
                } else {
                    AlphaMode::Empirical
                };
                (f.name.clone(), mode)
            })
            .collect();
        HyperConfig {
            omega: self.omega.first().copied(),
            a_sigma: Some(self.a_sigma),
            b_sigma: Some(self.b_sigma),
            lambda: Some(self.lambda),
            k: Some(self.k),
            alpha_mode,
            a_psi: self.a_psi.first().copied(),
            b_psi: self.b_psi.first().copied(),
            cv_sigma: None,
            string_norm: Some(self.string_norm),
        }
    }

    pub fn sigma2_prior_mean(&self) -> f64 {
        if self.a_sigma > 1.0 {
            self.b_sigma / (self.a_sigma - 1.0)
        } else {
            // mean undefined, fall back to the mode
            self.b_sigma / (self.a_sigma + 1.0)
        }
    }
}

/// Default hyperparameters for latent dimension `k`.
pub fn default_hyperparams(data: &Dataset, k: usize) -> Result<HyperParams> {
    HyperParams::resolve(data, k, &HyperConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Adjacency, FieldSpec, ProfileTable};

    fn dataset() -> Dataset {
        let fields = vec![
            FieldSpec::from_values("c", FieldKind::Categorical, ["a", "b", "c", "d", "a"]).unwrap(),
            FieldSpec::from_values("s", FieldKind::StringValued, ["xx", "xy", "xx", "yy", "yy"]).unwrap(),
        ];
        let t0 = ProfileTable::new(0, vec!["1".into(), "2".into()], vec![vec![Some(0), Some(0)], vec![Some(1), Some(1)]]).unwrap();
        let t1 = ProfileTable::new(
            1,
            vec!["1".into(), "2".into(), "3".into()],
            vec![vec![Some(2), Some(0)], vec![Some(3), Some(2)], vec![Some(0), Some(2)]],
        )
        .unwrap();
        let nets = vec![Adjacency::new(0, 2, []).unwrap(), Adjacency::new(1, 3, []).unwrap()];
        Dataset::new(fields, vec![t0, t1], nets).unwrap()
    }

    #[test]
    fn elicitation_at_100_records_in_the_plane() {
        let (a, b) = elicit_sigma_prior(100, 2, 0.5).unwrap();
        let mean = b / (a - 1.0);
        assert!((mean - 125.0 * PI).abs() < 1e-9);
        assert_eq!(a, 6.0);
        assert!((b - 1963.4954084936207).abs() < 1e-9);
        let cv = 1.0 / (a - 2.0).sqrt();
        assert!((cv - 0.5).abs() < 1e-12);
    }

    #[test]
    fn elicitation_rejects_tiny_populations() {
        assert!(elicit_sigma_prior(4, 2, 0.5).is_err());
        assert!(elicit_sigma_prior(5, 2, 0.5).is_ok());
    }

    #[test]
    fn elicited_mean_matches_direct_evaluation_for_many_k() {
        let i = 50usize;
        for k in 1..=12 {
            let (a, b) = elicit_sigma_prior(i, k, 0.5).unwrap();
            let kf = k as f64;
            let gamma = statrs::function::gamma::gamma(kf / 2.0 + 1.0);
            let direct = (i as f64).sqrt() / ((i as f64).sqrt() - 2.0) * PI.powf(kf / 2.0) / gamma * (i as f64).powf(2.0 / kf);
            assert!(((b / (a - 1.0)) - direct).abs() < 1e-9 * direct, "k={k}");
        }
    }

    #[test]
    fn defaults() {
        let d = dataset();
        let h = default_hyperparams(&d, 2).unwrap();
        assert_eq!(h.omega, vec![100.0, 100.0]);
        assert!((h.a_psi[0] / (h.a_psi[0] + h.b_psi[0]) - 0.01).abs() < 1e-15);
        assert_eq!(h.alpha[0], vec![1.0; 4]);
        assert_eq!(h.alpha[1], d.fields[1].empirical_freq);
        assert_eq!(h.lambda, 1.0);
        let (a, b) = elicit_sigma_prior(5, 2, 0.5).unwrap();
        assert_eq!((h.a_sigma, h.b_sigma), (a, b));
    }

    #[test]
    fn config_round_trip() {
        let d = dataset();
        let h = default_hyperparams(&d, 3).unwrap();
        let back = HyperParams::resolve(&d, 1, &h.to_config(&d)).unwrap();
        assert_eq!(back, h);
        let bad = HyperConfig {
            alpha_mode: BTreeMap::from([("nope".to_string(), AlphaMode::Ones)]),
            ..Default::default()
        };
        assert!(HyperParams::resolve(&d, 2, &bad).is_err());
    }
}
