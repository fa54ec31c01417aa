//! Bayesian record linkage across multiple social networks.
//!
//! Each network file carries a profile table (one row of categorical or
//! string-valued fields per account) and an undirected friendship graph.
//! Accounts are linked to latent individuals; a linkage structure groups
//! records into singletons and cross-file pairs. Profiles are tied to latent
//! individuals through a distortion model and graphs through a latent
//! distance model, and the whole hierarchy is explored with MCMC.
//!
//! Module map:
//!
//! - [`data`]: dataset ingestion, graph summaries and a synthetic generator.
//! - [`model`]: parameters, likelihoods, priors and hyperparameter rules.
//! - [`sampler`]: the Gibbs / Metropolis-Hastings chain.
//! - [`estimator`]: match probabilities, population size and point estimates.
//! - [`evaluation`]: precision/recall/F1 and DIC/WAIC.
//! - [`baseline`]: neighborhood-overlap seed propagation matcher.

pub mod baseline;
pub mod data;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod model;
pub mod sampler;
pub mod stats;

pub use data::{Adjacency, Dataset, FieldKind, FieldSpec, PairSet, ProfileTable, RecordRef};
pub use error::{Error, Result};
pub use estimator::{MatchProbabilityTable, PosteriorLinkage};
pub use model::{HyperParams, LikelihoodTerms, LinkageStructure, Model, ModelState};
pub use sampler::{run_chain, PosteriorSampleSet, SamplerConfig};
