use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::hyper::HyperParams;
use super::state::{GlobalParams, ModelState};
use super::strings::StringTable;
use super::{clamp_log, ln_or_zero, LikelihoodTerms, LOG_ZERO};
use crate::data::{Dataset, FieldKind};
use crate::error::Result;

const MISSING: u32 = u32::MAX;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `logistic(beta - |u_a - u_b|)`.
pub fn edge_probability(beta: f64, u_a: &[f64], u_b: &[f64]) -> f64 {
    let eta = beta - distance(u_a, u_b);
    1.0 / (1.0 + (-eta).exp())
}

/// Bernoulli log-likelihood of one dyad with linear predictor `eta`.
#[inline]
pub fn edge_loglik(edge: bool, eta: f64) -> f64 {
    if edge {
        -softplus(-eta)
    } else {
        -softplus(eta)
    }
}

/// `ln[(1-psi)·1{p = truth} + psi·dist[p]]` with the distortion indicator
/// summed out.
pub fn profile_cell_loglik_marginal(p: usize, truth: usize, psi: f64, dist: &[f64]) -> f64 {
    let exact = if p == truth { 1.0 - psi } else { 0.0 };
    ln_or_zero(exact + psi * dist[p])
}

/// Dataset, hyperparameters and cached lookup tables shared by every
/// likelihood evaluation. Immutable once built.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    pub data: &'a Dataset,
    pub hyper: HyperParams,
    pub terms: LikelihoodTerms,
    cells: Vec<u32>,
    file_of: Vec<u32>,
    local_of: Vec<u32>,
    strings: Vec<Option<StringTable>>,
    observed: Vec<usize>,
}

impl<'a> Model<'a> {
    pub fn new(data: &'a Dataset, hyper: HyperParams, terms: LikelihoodTerms) -> Result<Self> {
        hyper.validate(data)?;
        let l = data.n_fields();
        let n = data.n_records();
        let mut cells = vec![MISSING; n * l];
        let mut file_of = Vec::with_capacity(n);
        let mut local_of = Vec::with_capacity(n);
        let mut observed = vec![0; l];
        for g in 0..n {
            let r = data.record(g);
            file_of.push(r.file as u32);
            local_of.push(r.index as u32);
            for f in 0..l {
                if let Some(v) = data.profiles[r.file].cell(r.index, f) {
                    cells[g * l + f] = v as u32;
                    observed[f] += 1;
                }
            }
        }
        let strings = data
            .fields
            .iter()
            .map(|f| (f.kind == FieldKind::StringValued).then(|| StringTable::new(f, hyper.lambda, hyper.string_norm)))
            .collect();
        Ok(Model {
            data,
            hyper,
            terms,
            cells,
            file_of,
            local_of,
            strings,
            observed,
        })
    }

    pub fn n_records(&self) -> usize {
        self.file_of.len()
    }

    pub fn n_fields(&self) -> usize {
        self.data.n_fields()
    }

    pub fn k(&self) -> usize {
        self.hyper.k
    }

    #[inline]
    pub fn cell(&self, record: usize, field: usize) -> Option<usize> {
        let v = self.cells[record * self.n_fields() + field];
        (v != MISSING).then_some(v as usize)
    }

    #[inline]
    pub fn file_of(&self, record: usize) -> usize {
        self.file_of[record] as usize
    }

    #[inline]
    pub fn local_of(&self, record: usize) -> usize {
        self.local_of[record] as usize
    }

    /// Number of non-missing cells of a field.
    pub fn observed_cells(&self, field: usize) -> usize {
        self.observed[field]
    }

    pub fn string_table(&self, field: usize) -> Option<&StringTable> {
        self.strings[field].as_ref()
    }

    pub fn is_string(&self, field: usize) -> bool {
        self.strings[field].is_some()
    }

    /// Log probability that a distorted cell shows `observed` when the truth
    /// is `truth`.
    #[inline]
    pub fn log_distort(&self, globals: &GlobalParams, field: usize, truth: usize, observed: usize) -> f64 {
        match &self.strings[field] {
            Some(t) => t.log_distort(truth, observed),
            None => ln_or_zero(globals.theta[field][observed]),
        }
    }

    /// Log prior probability of a latent value.
    #[inline]
    pub fn log_latent_prior(&self, globals: &GlobalParams, field: usize, level: usize) -> f64 {
        match &self.strings[field] {
            Some(_) => ln_or_zero(self.hyper.alpha[field][level] / self.alpha_sum(field)),
            None => ln_or_zero(globals.theta[field][level]),
        }
    }

    /// Prior pmf over latent values of a field.
    pub fn latent_prior_pmf<'s>(&'s self, globals: &'s GlobalParams, field: usize) -> &'s [f64] {
        match &self.strings[field] {
            Some(_) => &self.hyper.alpha[field],
            None => &globals.theta[field],
        }
    }

    fn alpha_sum(&self, field: usize) -> f64 {
        self.hyper.alpha[field].iter().sum()
    }

    /// Marginal (over `w`) log-likelihood of one cell given the latent truth.
    /// Zero for missing cells or when the profile term is disabled.
    #[inline]
    pub fn cell_marginal(&self, globals: &GlobalParams, record: usize, field: usize, truth: usize) -> f64 {
        if !self.terms.profile {
            return 0.0;
        }
        let Some(p) = self.cell(record, field) else {
            return 0.0;
        };
        let psi = globals.psi[field];
        let distorted = ln_or_zero(psi) + self.log_distort(globals, field, truth, p);
        if p == truth {
            clamp_log(log_add_exp(ln_or_zero(1.0 - psi), distorted))
        } else {
            clamp_log(distorted)
        }
    }

    pub fn record_profile_marginal(&self, globals: &GlobalParams, record: usize, profile: &[u32]) -> f64 {
        (0..self.n_fields())
            .map(|l| self.cell_marginal(globals, record, l, profile[l] as usize))
            .sum()
    }

    /// Log-likelihood of every dyad touching `record` if its latent
    /// individual sat at `position`.
    pub fn record_network_loglik(&self, state: &ModelState, record: usize, position: &[f64]) -> f64 {
        if !self.terms.network {
            return 0.0;
        }
        let file = self.file_of(record);
        let adj = &self.data.networks[file];
        let beta = state.globals.beta[file];
        let me = self.local_of(record);
        let mut total = 0.0;
        for other in self.data.file_range(file) {
            if other == record {
                continue;
            }
            let u = state.latent.position(state.linkage.label(other));
            let eta = beta - distance(position, u);
            total += edge_loglik(adj.has_edge(me, self.local_of(other)), eta);
        }
        total
    }

    /// Network log-likelihood of every dyad touching a cluster's members.
    pub fn cluster_network_loglik(&self, state: &ModelState, cluster: usize, position: &[f64]) -> f64 {
        state
            .linkage
            .member_iter(cluster)
            .map(|r| self.record_network_loglik(state, r, position))
            .sum()
    }

    /// Network log-likelihood of one file for intercept `beta`.
    pub fn file_network_loglik(&self, state: &ModelState, file: usize, beta: f64) -> f64 {
        let adj = &self.data.networks[file];
        let range = self.data.file_range(file);
        let mut total = 0.0;
        for a in range.clone() {
            let ua = state.latent.position(state.linkage.label(a));
            for b in a + 1..range.end {
                let ub = state.latent.position(state.linkage.label(b));
                let eta = beta - distance(ua, ub);
                total += edge_loglik(adj.has_edge(a - range.start, b - range.start), eta);
            }
        }
        total
    }
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m <= LOG_ZERO {
        return LOG_ZERO;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Sum over files of the dyad log-likelihoods.
pub fn network_loglik(model: &Model, state: &ModelState) -> f64 {
    (0..model.data.n_files())
        .map(|j| model.file_network_loglik(state, j, state.globals.beta[j]))
        .sum()
}

/// Additive pieces of the log joint density.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogJointTerms {
    pub network: f64,
    pub profile: f64,
    pub distortion_prior: f64,
    pub position_prior: f64,
    pub sigma2_prior: f64,
    pub beta_prior: f64,
    pub latent_profile_prior: f64,
    pub theta_prior: f64,
    pub psi_prior: f64,
}

impl LogJointTerms {
    pub fn total(&self) -> f64 {
        clamp_log(
            self.network
                + self.profile
                + self.distortion_prior
                + self.position_prior
                + self.sigma2_prior
                + self.beta_prior
                + self.latent_profile_prior
                + self.theta_prior
                + self.psi_prior,
        )
    }
}

fn ln_beta_density(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * ln_or_zero(x) + (b - 1.0) * ln_or_zero(1.0 - x)
}

pub fn log_joint_terms(model: &Model, state: &ModelState) -> LogJointTerms {
    let h = &model.hyper;
    let g = &state.globals;
    let l = model.n_fields();
    let k = model.k() as f64;
    let mut t = LogJointTerms::default();

    if model.terms.network {
        t.network = network_loglik(model, state);
    }

    for r in 0..model.n_records() {
        let c = state.linkage.label(r);
        for f in 0..l {
            let Some(p) = model.cell(r, f) else { continue };
            let w = state.flags.get(r, f);
            if model.terms.profile {
                let truth = state.latent.profile(c, f);
                t.profile += if w {
                    model.log_distort(g, f, truth, p)
                } else if p == truth {
                    0.0
                } else {
                    LOG_ZERO
                };
            }
            t.distortion_prior += if w { ln_or_zero(g.psi[f]) } else { ln_or_zero(1.0 - g.psi[f]) };
        }
    }

    let s2 = g.sigma2;
    for n in 0..state.latent.len() {
        let sq: f64 = state.latent.position(n).iter().map(|x| x * x).sum();
        t.position_prior += -0.5 * k * (2.0 * PI * s2).ln() - sq / (2.0 * s2);
        for f in 0..l {
            t.latent_profile_prior += model.log_latent_prior(g, f, state.latent.profile(n, f));
        }
    }
    t.sigma2_prior = h.a_sigma * h.b_sigma.ln() - ln_gamma(h.a_sigma) - (h.a_sigma + 1.0) * s2.ln() - h.b_sigma / s2;
    for (b, w) in g.beta.iter().zip(&h.omega) {
        t.beta_prior += -0.5 * (2.0 * PI * w * w).ln() - b * b / (2.0 * w * w);
    }
    for f in 0..l {
        if !model.is_string(f) {
            let a = &h.alpha[f];
            let a0: f64 = a.iter().sum();
            t.theta_prior += ln_gamma(a0) - a.iter().map(|&x| ln_gamma(x)).sum::<f64>()
                + a.iter().zip(&g.theta[f]).map(|(&x, &th)| (x - 1.0) * ln_or_zero(th)).sum::<f64>();
        }
        t.psi_prior += ln_beta_density(g.psi[f], h.a_psi[f], h.b_psi[f]);
    }
    t
}

/// Log joint density of data and parameters, up to the constant uniform
/// linkage prior.
pub fn log_joint(model: &Model, state: &ModelState) -> f64 {
    log_joint_terms(model, state).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Adjacency, FieldKind};
    use crate::model::{DistortionFlags, LatentPopulation, LinkageStructure};
    use proptest::prelude::*;
    use statrs::distribution::{Beta, Continuous, InverseGamma, Normal};

    fn logistic(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn edge_probability_cases() {
        assert_eq!(edge_probability(0.0, &[0.0, 0.0], &[0.0, 0.0]), 0.5);
        assert!((edge_probability(0.0, &[0.0], &[1.0]) - 0.2689414213699951).abs() < 1e-15);
        assert!(edge_probability(-50.0, &[0.0], &[0.0]) < 1e-20);
    }

    #[test]
    fn edge_loglik_is_stable() {
        for eta in [-30.0, -1.0, 0.0, 2.5, 30.0] {
            assert!((edge_loglik(true, eta) - logistic(eta).ln()).abs() < 1e-12);
            assert!((edge_loglik(false, eta) + (1.0 + eta.exp()).ln()).abs() < 1e-12);
        }
        assert!(edge_loglik(false, 800.0).is_finite());
        assert!(edge_loglik(true, -800.0).is_finite());
    }

    proptest! {
        #[test]
        fn edge_probability_symmetry_and_rotation(
            beta in -5.0f64..5.0,
            a in proptest::array::uniform2(-3.0f64..3.0),
            b in proptest::array::uniform2(-3.0f64..3.0),
            angle in 0.0f64..6.3,
        ) {
            let p = edge_probability(beta, &a, &b);
            prop_assert!((p - edge_probability(beta, &b, &a)).abs() < 1e-15);
            let rot = |v: [f64; 2]| [v[0] * angle.cos() - v[1] * angle.sin(), v[0] * angle.sin() + v[1] * angle.cos()];
            prop_assert!((p - edge_probability(beta, &rot(a), &rot(b))).abs() < 1e-12);
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn edge_probability_decreases_with_distance(beta in -5.0f64..5.0, d1 in 0.0f64..5.0, extra in 0.01f64..5.0) {
            prop_assert!(edge_probability(beta, &[0.0], &[d1]) > edge_probability(beta, &[0.0], &[d1 + extra]));
        }
    }

    /// Two files (3 and 2 records), one categorical field with levels
    /// a/b/c and a string field.
    fn fixture() -> Dataset {
        let s = |x: &str| Some(x.to_string());
        let files = vec![
            (
                vec!["1".into(), "2".into(), "3".into()],
                vec![vec![s("a"), s("ann")], vec![s("b"), s("bob")], vec![s("a"), None]],
            ),
            (vec!["1".into(), "2".into()], vec![vec![s("c"), s("anne")], vec![None, s("bob")]]),
        ];
        let nets = vec![
            Adjacency::new(0, 3, [(0, 1), (1, 2)]).unwrap(),
            Adjacency::new(1, 2, [(0, 1)]).unwrap(),
        ];
        Dataset::from_raw(
            &["c".into(), "s".into()],
            &[FieldKind::Categorical, FieldKind::StringValued],
            files,
            nets,
        )
        .unwrap()
    }

    fn hyper(data: &Dataset) -> HyperParams {
        let mut h = crate::model::default_hyperparams(data, 2).unwrap();
        h.a_sigma = 3.0;
        h.b_sigma = 2.0;
        h.omega = vec![1.5, 0.7];
        h.alpha[0] = vec![1.0, 2.0, 0.5];
        h
    }

    /// Record 0 linked with record 3 (file 1, index 0); others singletons.
    fn state(data: &Dataset, model: &Model) -> ModelState {
        let linkage = LinkageStructure::from_labels(data, &[0, 1, 2, 0, 3]).unwrap();
        let levels = [data.fields[0].n_levels(), data.fields[1].n_levels()];
        let mut latent = LatentPopulation::new(2, 2);
        let pos = [[0.3, -0.2], [1.1, 0.4], [-0.7, 0.9], [0.0, -1.3]];
        for n in 0..linkage.n_clusters() {
            let r = linkage.members(n).0;
            let pi = [
                model.cell(r, 0).unwrap_or(n % levels[0]) as u32,
                model.cell(r, 1).unwrap_or(n % levels[1]) as u32,
            ];
            latent.push(&pi, &pos[n]);
        }
        let mut flags = DistortionFlags::new(data.n_records(), 2);
        for r in 0..data.n_records() {
            let c = linkage.label(r);
            for l in 0..2 {
                if let Some(p) = model.cell(r, l) {
                    flags.set(r, l, p != latent.profile(c, l));
                }
            }
        }
        // an undistorted-but-flagged cell exercises the w = 1, p = truth branch
        flags.set(1, 0, true);
        ModelState {
            linkage,
            latent,
            flags,
            globals: GlobalParams {
                beta: vec![0.4, -0.8],
                sigma2: 1.7,
                theta: vec![vec![0.2, 0.5, 0.3], vec![]],
                psi: vec![0.1, 0.25],
            },
        }
    }

    #[test]
    fn network_loglik_by_hand() {
        let data = fixture();
        let model = Model::new(&data, hyper(&data), LikelihoodTerms::ALL).unwrap();
        let st = state(&data, &model);
        let pos = |r: usize| st.latent.position(st.linkage.label(r)).to_vec();
        let dyad = |a: usize, b: usize, beta: f64, edge: bool| {
            let d = ((pos(a)[0] - pos(b)[0]).powi(2) + (pos(a)[1] - pos(b)[1]).powi(2)).sqrt();
            let p = logistic(beta - d);
            if edge {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        };
        let expected = dyad(0, 1, 0.4, true) + dyad(0, 2, 0.4, false) + dyad(1, 2, 0.4, true) + dyad(3, 4, -0.8, true);
        assert!((network_loglik(&model, &st) - expected).abs() < 1e-12);
        // dyads touching record 0
        let r0 = dyad(0, 1, 0.4, true) + dyad(0, 2, 0.4, false);
        assert!((model.record_network_loglik(&st, 0, &pos(0)) - r0).abs() < 1e-12);
    }

    #[test]
    fn marginal_cell_enumerates_both_indicators() {
        let dist = [0.2, 0.5, 0.3];
        for (p, t) in [(0, 0), (1, 0), (2, 2)] {
            let psi = 0.3;
            let w0 = if p == t { (1.0 - psi) * 1.0 } else { 0.0 };
            let w1 = psi * dist[p];
            assert!((profile_cell_loglik_marginal(p, t, psi, &dist) - (w0 + w1).ln()).abs() < 1e-14);
        }
        let flat = [0.05; 20];
        assert!((profile_cell_loglik_marginal(3, 1, 0.05, &flat) - 0.0025f64.ln()).abs() < 1e-12);
        assert_eq!(profile_cell_loglik_marginal(3, 1, 0.0, &flat), LOG_ZERO);
    }

    #[test]
    fn model_cell_marginal_matches_free_function() {
        let data = fixture();
        let model = Model::new(&data, hyper(&data), LikelihoodTerms::ALL).unwrap();
        let st = state(&data, &model);
        let g = &st.globals;
        for r in 0..data.n_records() {
            let Some(p) = model.cell(r, 0) else { continue };
            for t in 0..3 {
                let want = profile_cell_loglik_marginal(p, t, g.psi[0], &g.theta[0]);
                assert!((model.cell_marginal(g, r, 0, t) - want).abs() < 1e-14);
            }
        }
        // string field: distortion pmf is normalized over observed values
        let table = model.string_table(1).unwrap();
        for t in 0..table.n_levels() {
            let total: f64 = (0..table.n_levels()).map(|p| table.log_distort(t, p).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let pm = Model::new(&data, hyper(&data), LikelihoodTerms::NETWORK_ONLY).unwrap();
        assert_eq!(pm.cell_marginal(g, 0, 0, 2), 0.0);
    }

    /// Log joint written out term by term with library densities.
    fn brute_log_joint(data: &Dataset, model: &Model, st: &ModelState) -> f64 {
        let h = &model.hyper;
        let g = &st.globals;
        let mut total = 0.0;
        for j in 0..data.n_files() {
            let range = data.file_range(j);
            for a in range.clone() {
                for b in a + 1..range.end {
                    let ua = st.latent.position(st.linkage.label(a));
                    let ub = st.latent.position(st.linkage.label(b));
                    let p = edge_probability(g.beta[j], ua, ub);
                    total += if data.networks[j].has_edge(a - range.start, b - range.start) {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    };
                }
            }
        }
        for r in 0..data.n_records() {
            let c = st.linkage.label(r);
            for l in 0..2 {
                let Some(p) = data.cell(r, l) else { continue };
                let w = st.flags.get(r, l);
                let t = st.latent.profile(c, l);
                total += if w { g.psi[l].ln() } else { (1.0 - g.psi[l]).ln() };
                if w {
                    total += if l == 0 {
                        g.theta[0][p].ln()
                    } else {
                        crate::model::string_distortion_pmf(&data.fields[1], t, h.lambda)[p].ln()
                    };
                } else {
                    assert_eq!(p, t);
                }
            }
        }
        let sd = g.sigma2.sqrt();
        let normal = Normal::new(0.0, sd).unwrap();
        for n in 0..st.latent.len() {
            total += st.latent.position(n).iter().map(|&x| normal.ln_pdf(x)).sum::<f64>();
            total += g.theta[0][st.latent.profile(n, 0)].ln();
            let a1 = &h.alpha[1];
            total += (a1[st.latent.profile(n, 1)] / a1.iter().sum::<f64>()).ln();
        }
        total += InverseGamma::new(h.a_sigma, h.b_sigma).unwrap().ln_pdf(g.sigma2);
        for j in 0..2 {
            total += Normal::new(0.0, h.omega[j]).unwrap().ln_pdf(g.beta[j]);
        }
        let a0 = &h.alpha[0];
        let s0: f64 = a0.iter().sum();
        total += ln_gamma(s0) - a0.iter().map(|&a| ln_gamma(a)).sum::<f64>()
            + a0.iter().zip(&g.theta[0]).map(|(a, t)| (a - 1.0) * t.ln()).sum::<f64>();
        for l in 0..2 {
            total += Beta::new(h.a_psi[l], h.b_psi[l]).unwrap().ln_pdf(g.psi[l]);
        }
        total
    }

    #[test]
    fn log_joint_matches_direct_evaluation() {
        let data = fixture();
        let model = Model::new(&data, hyper(&data), LikelihoodTerms::ALL).unwrap();
        let st = state(&data, &model);
        let got = log_joint(&model, &st);
        let want = brute_log_joint(&data, &model, &st);
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn log_joint_differences_are_local() {
        let data = fixture();
        let model = Model::new(&data, hyper(&data), LikelihoodTerms::ALL).unwrap();
        let st = state(&data, &model);
        let base = log_joint_terms(&model, &st);

        let mut s2 = st.clone();
        s2.globals.sigma2 = 0.6;
        let t = log_joint_terms(&model, &s2);
        let ig = InverseGamma::new(model.hyper.a_sigma, model.hyper.b_sigma).unwrap();
        let sq = st.latent.squared_norm_sum();
        let nk = (st.latent.len() * 2) as f64;
        let pos = |s: f64| -0.5 * nk * (2.0 * PI * s).ln() - sq / (2.0 * s);
        let want = ig.ln_pdf(0.6) - ig.ln_pdf(1.7) + pos(0.6) - pos(1.7);
        assert!((t.total() - base.total() - want).abs() < 1e-10);
        assert_eq!(t.network, base.network);

        let mut sb = st.clone();
        sb.globals.beta[1] = 2.0;
        let t = log_joint_terms(&model, &sb);
        let nb = Normal::new(0.0, 0.7).unwrap();
        let y = |b: f64| {
            let d: f64 = (0..2).map(|k| (st.latent.position(0)[k] - st.latent.position(3)[k]).powi(2)).sum::<f64>().sqrt();
            logistic(b - d).ln()
        };
        let want = nb.ln_pdf(2.0) - nb.ln_pdf(-0.8) + y(2.0) - y(-0.8);
        assert!((t.total() - base.total() - want).abs() < 1e-10);
    }

    #[test]
    fn inconsistent_indicator_hits_sentinel() {
        let data = fixture();
        let model = Model::new(&data, hyper(&data), LikelihoodTerms::ALL).unwrap();
        let mut st = state(&data, &model);
        // record 3 (value c) shares a cluster with record 0 (value a)
        st.flags.set(3, 0, false);
        assert!(log_joint(&model, &st) <= LOG_ZERO * 0.5);
    }
}
