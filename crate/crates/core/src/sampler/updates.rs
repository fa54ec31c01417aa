//! Individual block updates. Each takes the model, the mutable state and an
//! RNG, and leaves the state satisfying every structural invariant.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::LinkageRatio;
use crate::model::{Model, ModelState, LOG_ZERO};
use crate::stats::{sample_categorical, sample_log_categorical};

const NONE: u32 = u32::MAX;

/// Accepted and proposed Metropolis moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveCount {
    pub accepted: u64,
    pub proposed: u64,
}

impl MoveCount {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn add(&mut self, other: MoveCount) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

/// Multiplicative step-size adaptation: `step * exp(rate - target)`.
pub fn adapt_step_size(step: f64, observed_rate: f64, target: f64) -> f64 {
    step * (observed_rate - target).exp()
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

fn gaussian_vec<R: Rng + ?Sized>(k: usize, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Fresh latent profile drawn from the latent-value prior.
fn draw_prior_profile<R: Rng + ?Sized>(model: &Model, state: &ModelState, rng: &mut R) -> Vec<u32> {
    (0..model.n_fields())
        .map(|l| sample_categorical(model.latent_prior_pmf(&state.globals, l), rng) as u32)
        .collect()
}

/// Records that are unanchored singletons, grouped by file, with O(1)
/// insertion and removal.
struct FreeSingletons {
    by_file: Vec<Vec<u32>>,
    slot: Vec<u32>,
    total: usize,
}

impl FreeSingletons {
    fn build(model: &Model, state: &ModelState, anchored: &[bool]) -> Self {
        let mut s = FreeSingletons {
            by_file: vec![Vec::new(); model.data.n_files()],
            slot: vec![NONE; model.n_records()],
            total: 0,
        };
        for r in 0..model.n_records() {
            if !anchored[r] && state.linkage.is_singleton(state.linkage.label(r)) {
                s.insert(r, model.file_of(r));
            }
        }
        s
    }

    fn insert(&mut self, r: usize, file: usize) {
        debug_assert_eq!(self.slot[r], NONE);
        self.slot[r] = self.by_file[file].len() as u32;
        self.by_file[file].push(r as u32);
        self.total += 1;
    }

    fn remove(&mut self, r: usize, file: usize) {
        let i = self.slot[r] as usize;
        debug_assert!(self.slot[r] != NONE);
        let list = &mut self.by_file[file];
        list.swap_remove(i);
        if i < list.len() {
            self.slot[list[i] as usize] = i as u32;
        }
        self.slot[r] = NONE;
        self.total -= 1;
    }

    fn count_outside(&self, file: usize) -> usize {
        self.total - self.by_file[file].len()
    }

    fn nth_outside(&self, file: usize, mut k: usize) -> usize {
        for (f, list) in self.by_file.iter().enumerate() {
            if f == file {
                continue;
            }
            if k < list.len() {
                return list[k] as usize;
            }
            k -= list.len();
        }
        unreachable!("index beyond eligible targets")
    }
}

/// One sweep of linkage moves over every unanchored record.
///
/// For record `r` the proposal is uniform over "detach into a new
/// singleton" and "join free singleton `t`" for every unanchored singleton
/// `t` in another file. A new latent individual draws its profile and
/// position from their priors, so those densities cancel.
pub fn update_linkage<R: Rng + ?Sized>(
    model: &Model,
    state: &mut ModelState,
    anchored: &[bool],
    ratio: LinkageRatio,
    rng: &mut R,
) -> MoveCount {
    let mut free = FreeSingletons::build(model, state, anchored);
    let mut count = MoveCount::default();
    let k = model.k();
    for r in 0..model.n_records() {
        if anchored[r] {
            continue;
        }
        let j = model.file_of(r);
        let c = state.linkage.label(r);
        let partner = state.linkage.partner(r);
        let n_fwd = free.count_outside(j);
        let choice = rng.random_range(0..=n_fwd);

        let old_profile = state.latent.profile_row(c).to_vec();
        let old_u = state.latent.position(c).to_vec();
        let (new_profile, new_u, target, n_rev) = if choice == 0 {
            let pi = draw_prior_profile(model, state, rng);
            let u = gaussian_vec(k, state.globals.sigma2.sqrt(), rng);
            let n_rev = if partner.is_some() { n_fwd + 1 } else { n_fwd };
            (pi, u, None, n_rev)
        } else {
            let t = free.nth_outside(j, choice - 1);
            let tc = state.linkage.label(t);
            let n_rev = if partner.is_some() { n_fwd } else { n_fwd - 1 };
            (
                state.latent.profile_row(tc).to_vec(),
                state.latent.position(tc).to_vec(),
                Some(t),
                n_rev,
            )
        };

        let mut log_ratio = ((1 + n_fwd) as f64).ln() - ((1 + n_rev) as f64).ln();
        log_ratio += model.record_network_loglik(state, r, &new_u) - model.record_network_loglik(state, r, &old_u);
        if ratio == LinkageRatio::Exact {
            let new_lp = model.record_profile_marginal(&state.globals, r, &new_profile);
            if new_lp <= LOG_ZERO * 0.5 {
                log_ratio = f64::NEG_INFINITY;
            } else {
                log_ratio += new_lp - model.record_profile_marginal(&state.globals, r, &old_profile);
            }
        }

        let accepted = accept(log_ratio, rng);
        count.record(accepted);
        if accepted {
            match (target, partner) {
                (None, Some(s)) => {
                    state.detach_record(r, &new_profile, &new_u);
                    free.insert(s, model.file_of(s));
                    free.insert(r, j);
                }
                (None, None) => state.latent.set_row(c, &new_profile, &new_u),
                (Some(t), Some(s)) => {
                    let tc = state.linkage.label(t);
                    state.move_record(r, tc);
                    free.insert(s, model.file_of(s));
                    free.remove(t, model.file_of(t));
                }
                (Some(t), None) => {
                    let tc = state.linkage.label(t);
                    state.merge_record(r, tc);
                    free.remove(t, model.file_of(t));
                    free.remove(r, j);
                }
            }
        }
        redraw_record_flags(model, state, r, rng);
    }
    count
}

/// Draws every distortion indicator of one record from its full
/// conditional given the record's current latent profile.
pub fn redraw_record_flags<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, r: usize, rng: &mut R) {
    let c = state.linkage.label(r);
    for l in 0..model.n_fields() {
        let w = match model.cell(r, l) {
            None => false,
            Some(p) => {
                let psi = state.globals.psi[l];
                let truth = state.latent.profile(c, l);
                if !model.terms.profile {
                    rng.random::<f64>() < psi
                } else if p != truth {
                    true
                } else {
                    let q = psi * model.log_distort(&state.globals, l, truth, p).exp();
                    let denom = q + 1.0 - psi;
                    denom <= 0.0 || rng.random::<f64>() < q / denom
                }
            }
        };
        state.flags.set(r, l, w);
    }
}

pub fn update_distortions<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, rng: &mut R) {
    for r in 0..model.n_records() {
        redraw_record_flags(model, state, r, rng);
    }
}

/// Gibbs draw of every latent profile value. A cluster with an undistorted
/// observed cell is pinned to it; otherwise the value is drawn from its
/// prior reweighted by the distortion densities of the member cells.
pub fn update_latent_profiles<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, rng: &mut R) {
    let mut logw = Vec::new();
    for n in 0..state.latent.len() {
        for l in 0..model.n_fields() {
            let mut pinned = None;
            let mut distorted = [0usize; 2];
            let mut n_distorted = 0;
            if model.terms.profile {
                for r in state.linkage.member_iter(n) {
                    if let Some(p) = model.cell(r, l) {
                        if state.flags.get(r, l) {
                            distorted[n_distorted] = p;
                            n_distorted += 1;
                        } else {
                            pinned = Some(p);
                        }
                    }
                }
            }
            let value = if let Some(p) = pinned {
                p
            } else if n_distorted == 0 || !model.is_string(l) {
                sample_categorical(model.latent_prior_pmf(&state.globals, l), rng)
            } else {
                let table = model.string_table(l).expect("string field");
                let alpha = &model.hyper.alpha[l];
                logw.clear();
                logw.extend((0..table.n_levels()).map(|s| {
                    alpha[s].ln() + distorted[..n_distorted].iter().map(|&p| table.log_distort(s, p)).sum::<f64>()
                }));
                sample_log_categorical(&logw, rng)
            };
            state.latent.set_profile(n, l, value);
        }
    }
}

/// Random-walk Metropolis on each latent position.
pub fn update_positions<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, step: f64, rng: &mut R) -> MoveCount {
    let mut count = MoveCount::default();
    let k = model.k();
    let s2 = state.globals.sigma2;
    for n in 0..state.latent.len() {
        let cur = state.latent.position(n).to_vec();
        let prop: Vec<f64> = cur
            .iter()
            .zip(gaussian_vec(k, step, rng))
            .map(|(a, b)| a + b)
            .collect();
        let sq = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>();
        let mut log_ratio = -(sq(&prop) - sq(&cur)) / (2.0 * s2);
        if model.terms.network {
            log_ratio +=
                model.cluster_network_loglik(state, n, &prop) - model.cluster_network_loglik(state, n, &cur);
        }
        let ok = accept(log_ratio, rng);
        count.record(ok);
        if ok {
            state.latent.position_mut(n).copy_from_slice(&prop);
        }
    }
    count
}

/// Beta draw of each field's distortion probability from the indicators of
/// its observed cells.
pub fn update_psi<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, rng: &mut R) {
    for l in 0..model.n_fields() {
        let distorted = (0..model.n_records())
            .filter(|&r| model.cell(r, l).is_some() && state.flags.get(r, l))
            .count() as f64;
        let n_obs = model.observed_cells(l) as f64;
        let a = model.hyper.a_psi[l] + distorted;
        let b = model.hyper.b_psi[l] + n_obs - distorted;
        state.globals.psi[l] = Beta::new(a, b).expect("positive beta parameters").sample(rng);
    }
}

/// Dirichlet draw of each categorical field's distribution from the latent
/// values and the distorted observed cells.
pub fn update_theta<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, rng: &mut R) {
    for l in 0..model.n_fields() {
        if model.is_string(l) {
            continue;
        }
        let mut conc = model.hyper.alpha[l].clone();
        for n in 0..state.latent.len() {
            conc[state.latent.profile(n, l)] += 1.0;
        }
        if model.terms.profile {
            for r in 0..model.n_records() {
                if let Some(p) = model.cell(r, l) {
                    if state.flags.get(r, l) {
                        conc[p] += 1.0;
                    }
                }
            }
        }
        state.globals.theta[l] = sample_dirichlet(&conc, rng);
    }
}

pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma underflowed: fall back to the largest concentration
        let m = conc.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        g.iter_mut().enumerate().for_each(|(i, x)| *x = (i == m) as u8 as f64);
    }
    g
}

/// Random-walk Metropolis on each file's intercept.
pub fn update_beta<R: Rng + ?Sized>(
    model: &Model,
    state: &mut ModelState,
    steps: &[f64],
    rng: &mut R,
) -> Vec<MoveCount> {
    let mut counts = vec![MoveCount::default(); model.data.n_files()];
    for j in 0..model.data.n_files() {
        let cur = state.globals.beta[j];
        let prop = cur + steps[j] * rng.sample::<f64, _>(StandardNormal);
        let w2 = model.hyper.omega[j] * model.hyper.omega[j];
        let mut log_ratio = -(prop * prop - cur * cur) / (2.0 * w2);
        if model.terms.network {
            log_ratio += model.file_network_loglik(state, j, prop) - model.file_network_loglik(state, j, cur);
        }
        let ok = accept(log_ratio, rng);
        counts[j].record(ok);
        if ok {
            state.globals.beta[j] = prop;
        }
    }
    counts
}

/// Inverse-gamma draw of the latent space variance.
pub fn update_sigma2<R: Rng + ?Sized>(model: &Model, state: &mut ModelState, rng: &mut R) {
    let shape = model.hyper.a_sigma + 0.5 * (state.latent.len() * model.k()) as f64;
    let rate = model.hyper.b_sigma + 0.5 * state.latent.squared_norm_sum();
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng);
    state.globals.sigma2 = 1.0 / g;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptation_direction() {
        assert!(adapt_step_size(1.0, 0.9, 0.44) > 1.0);
        assert!(adapt_step_size(1.0, 0.1, 0.44) < 1.0);
        assert_eq!(adapt_step_size(2.0, 0.44, 0.44), 2.0);
        assert!((adapt_step_size(1.0, 0.0, 0.234) - (-0.234f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn move_count_rate() {
        let mut m = MoveCount::default();
        assert_eq!(m.rate(), 0.0);
        m.record(true);
        m.record(false);
        assert_eq!(m.rate(), 0.5);
    }
}
