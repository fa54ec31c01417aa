use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::PairSet;
use crate::error::Result;
use crate::model::{DistortionFlags, GlobalParams, LatentPopulation, LinkageStructure, Model, ModelState};
use crate::stats::sample_categorical;

/// Starting state: anchors paired and every other record a singleton, latent
/// profiles copied from the first observed member cell, positions drawn from
/// the prior at the prior-mean variance, intercepts at zero and the other
/// globals at their prior means.
pub fn initial_state<R: Rng + ?Sized>(model: &Model, anchors: Option<&PairSet>, rng: &mut R) -> Result<ModelState> {
    let data = model.data;
    let h = &model.hyper;
    let linkage = match anchors {
        Some(p) => LinkageStructure::from_pairs(data, p)?,
        None => LinkageStructure::singletons(data),
    };
    let l = model.n_fields();
    let k = model.k();
    let sigma2 = h.sigma2_prior_mean();
    let theta: Vec<Vec<f64>> = h
        .alpha
        .iter()
        .map(|a| {
            let s: f64 = a.iter().sum();
            a.iter().map(|x| x / s).collect()
        })
        .collect();
    let globals = GlobalParams {
        beta: vec![0.0; data.n_files()],
        sigma2,
        theta,
        psi: h.a_psi.iter().zip(&h.b_psi).map(|(a, b)| a / (a + b)).collect(),
    };

    let mut latent = LatentPopulation::new(l, k);
    let mut profile = vec![0u32; l];
    for n in 0..linkage.n_clusters() {
        for (f, slot) in profile.iter_mut().enumerate() {
            let observed = linkage.member_iter(n).find_map(|r| model.cell(r, f));
            *slot = match observed {
                Some(v) => v,
                None => sample_categorical(model.latent_prior_pmf(&globals, f), rng),
            } as u32;
        }
        let u: Vec<f64> = (0..k)
            .map(|_| sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        latent.push(&profile, &u);
    }

    let mut flags = DistortionFlags::new(data.n_records(), l);
    for r in 0..data.n_records() {
        let c = linkage.label(r);
        for f in 0..l {
            if let Some(p) = model.cell(r, f) {
                flags.set(r, f, p != latent.profile(c, f));
            }
        }
    }
    let state = ModelState {
        linkage,
        latent,
        flags,
        globals,
    };
    state.validate_structure()?;
    Ok(state)
}
