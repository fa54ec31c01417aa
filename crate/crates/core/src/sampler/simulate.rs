//! Forward simulation: draw a full state from the prior, and observations
//! given a state. Together with the kernel these give a Geweke test.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::updates::sample_dirichlet;
use crate::data::{Adjacency, Dataset, PairSet, ProfileTable, RecordRef};
use crate::error::{Error, Result};
use crate::model::{edge_probability, DistortionFlags, GlobalParams, LatentPopulation, LinkageStructure, Model, ModelState};
use crate::stats::{sample_categorical, sample_log_categorical};

/// Uniform draw over valid two-file linkage structures: the number of pairs
/// `m` has weight `C(n1, m) C(n2, m) m!`, then records are paired uniformly.
fn uniform_two_file_linkage<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<LinkageStructure> {
    if data.n_files() != 2 {
        return Err(Error::Config("prior linkage sampling supports exactly two files".into()));
    }
    let (n1, n2) = (data.file_size(0), data.file_size(1));
    let lnf = |x: usize| ln_gamma(x as f64 + 1.0);
    let logw: Vec<f64> = (0..=n1.min(n2))
        .map(|m| lnf(n1) - lnf(m) - lnf(n1 - m) + lnf(n2) - lnf(m) - lnf(n2 - m) + lnf(m))
        .collect();
    let m = sample_log_categorical(&logw, rng);
    let a = sample(rng, n1, m).into_vec();
    let b = sample(rng, n2, m).into_vec();
    let pairs = PairSet::new(a.into_iter().zip(b).map(|(i, k)| (RecordRef::new(0, i), RecordRef::new(1, k))))?;
    LinkageStructure::from_pairs(data, &pairs)
}

/// Draws every parameter from the prior. The linkage is uniform over valid
/// structures (two files only). Distortion indicators are drawn for the
/// cells observed in the model's dataset; missing cells stay missing.
pub fn sample_prior_state<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Result<ModelState> {
    let h = &model.hyper;
    let data = model.data;
    let linkage = uniform_two_file_linkage(data, rng)?;
    let sigma2 = 1.0 / Gamma::new(h.a_sigma, 1.0 / h.b_sigma).map_err(dist_err)?.sample(rng);
    let beta = h
        .omega
        .iter()
        .map(|w| w * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let theta = (0..model.n_fields())
        .map(|l| {
            if model.is_string(l) {
                let s: f64 = h.alpha[l].iter().sum();
                h.alpha[l].iter().map(|a| a / s).collect()
            } else {
                sample_dirichlet(&h.alpha[l], rng)
            }
        })
        .collect();
    let psi = h
        .a_psi
        .iter()
        .zip(&h.b_psi)
        .map(|(&a, &b)| Beta::new(a, b).map(|d| d.sample(rng)).map_err(dist_err))
        .collect::<Result<Vec<f64>>>()?;
    let globals = GlobalParams {
        beta,
        sigma2,
        theta,
        psi,
    };
    let mut latent = LatentPopulation::new(model.n_fields(), model.k());
    for _ in 0..linkage.n_clusters() {
        let profile: Vec<u32> = (0..model.n_fields())
            .map(|l| sample_categorical(model.latent_prior_pmf(&globals, l), rng) as u32)
            .collect();
        let u: Vec<f64> = (0..model.k())
            .map(|_| sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        latent.push(&profile, &u);
    }
    let mut flags = DistortionFlags::new(data.n_records(), model.n_fields());
    for r in 0..data.n_records() {
        for l in 0..model.n_fields() {
            if model.cell(r, l).is_some() {
                flags.set(r, l, rng.random::<f64>() < globals.psi[l]);
            }
        }
    }
    Ok(ModelState {
        linkage,
        latent,
        flags,
        globals,
    })
}

fn dist_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Domain(e.to_string())
}

/// Draws profiles and graphs from the likelihood given a state. Disabled
/// likelihood terms leave the corresponding observations unchanged.
pub fn simulate_observations<R: Rng + ?Sized>(model: &Model, state: &ModelState, rng: &mut R) -> Result<Dataset> {
    let data = model.data;
    let mut profiles = Vec::with_capacity(data.n_files());
    let mut networks = Vec::with_capacity(data.n_files());
    let mut pmf = Vec::new();
    for j in 0..data.n_files() {
        let range = data.file_range(j);
        let mut rows = Vec::with_capacity(range.len());
        for r in range.clone() {
            let c = state.linkage.label(r);
            let row = (0..model.n_fields())
                .map(|l| {
                    let observed = model.cell(r, l)?;
                    if !model.terms.profile {
                        return Some(observed);
                    }
                    let truth = state.latent.profile(c, l);
                    if !state.flags.get(r, l) {
                        return Some(truth);
                    }
                    let n = data.fields[l].n_levels();
                    pmf.clear();
                    pmf.extend((0..n).map(|p| model.log_distort(&state.globals, l, truth, p).exp()));
                    Some(sample_categorical(&pmf, rng))
                })
                .collect();
            rows.push(row);
        }
        profiles.push(ProfileTable::new(j, data.profiles[j].record_ids.clone(), rows)?);

        if model.terms.network {
            let mut edges = Vec::new();
            let beta = state.globals.beta[j];
            for a in range.clone() {
                let ua = state.latent.position(state.linkage.label(a));
                for b in a + 1..range.end {
                    let ub = state.latent.position(state.linkage.label(b));
                    if rng.random::<f64>() < edge_probability(beta, ua, ub) {
                        edges.push((a - range.start, b - range.start));
                    }
                }
            }
            networks.push(Adjacency::new(j, range.len(), edges)?);
        } else {
            networks.push(data.networks[j].clone());
        }
    }
    data.with_observations(profiles, networks)
}
