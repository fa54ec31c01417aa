//! Model parameters, likelihoods and priors.
//!
//! Network data follow a latent distance model with a logit link: an edge
//! between two records of file `j` appears with probability
//! `logistic(beta_j - |u_a - u_b|)`, where `u` are the positions of the
//! latent individuals the records link to. Each profile cell is either an
//! exact copy of the latent truth (`w = 0`) or a draw from a distortion
//! distribution (`w = 1`).

mod hyper;
mod likelihood;
mod linkage;
mod state;
mod strings;

pub use hyper::{
    default_hyperparams, elicit_sigma_prior, AlphaMode, HyperConfig, HyperParams, Link, StringNormalization,
};
pub use likelihood::{
    edge_loglik, edge_probability, log_joint, log_joint_terms, network_loglik, profile_cell_loglik_marginal,
    LogJointTerms, Model,
};
pub use linkage::LinkageStructure;
pub use state::{DistortionFlags, GlobalParams, LatentPopulation, ModelState};
pub use strings::{levenshtein, string_distortion_pmf, StringTable};

use serde::{Deserialize, Serialize};

/// Finite stand-in for `ln 0`, so accept/reject arithmetic stays total.
pub const LOG_ZERO: f64 = -1e300;

/// Which likelihood factors take part in inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikelihoodTerms {
    pub network: bool,
    pub profile: bool,
}

impl LikelihoodTerms {
    pub const ALL: Self = LikelihoodTerms {
        network: true,
        profile: true,
    };
    pub const PROFILE_ONLY: Self = LikelihoodTerms {
        network: false,
        profile: true,
    };
    pub const NETWORK_ONLY: Self = LikelihoodTerms {
        network: true,
        profile: false,
    };
    pub const NONE: Self = LikelihoodTerms {
        network: false,
        profile: false,
    };
}

impl Default for LikelihoodTerms {
    fn default() -> Self {
        Self::ALL
    }
}

#[inline]
pub(crate) fn clamp_log(x: f64) -> f64 {
    if x.is_nan() || x < LOG_ZERO {
        LOG_ZERO
    } else {
        x
    }
}

#[inline]
pub(crate) fn ln_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        LOG_ZERO
    }
}
