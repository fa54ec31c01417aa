use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::initial_state;
use super::updates::*;
use super::SamplerConfig;
use crate::data::{Dataset, PairSet};
use crate::error::{Error, Result};
use crate::evaluation::{pointwise_loglik, PointwiseLogLik};
use crate::model::{LinkageStructure, Model, ModelState};
use crate::stats;

/// The transition kernel: one full sweep over all blocks plus step-size
/// bookkeeping. Holds no reference to the data, so the same kernel can be
/// applied under different models (as the Geweke test does).
#[derive(Debug, Clone)]
pub struct Kernel {
    pub config: SamplerConfig,
    pub step_u: f64,
    pub step_beta: Vec<f64>,
    iteration: usize,
    linkage: MoveCount,
    positions: MoveCount,
    beta: Vec<MoveCount>,
    window_positions: MoveCount,
    window_beta: Vec<MoveCount>,
}

impl Kernel {
    pub fn new(config: SamplerConfig, n_files: usize) -> Result<Self> {
        config.validate()?;
        Ok(Kernel {
            step_u: config.step_u,
            step_beta: vec![config.step_beta; n_files],
            config,
            iteration: 0,
            linkage: MoveCount::default(),
            positions: MoveCount::default(),
            beta: vec![MoveCount::default(); n_files],
            window_positions: MoveCount::default(),
            window_beta: vec![MoveCount::default(); n_files],
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn targets(&self, k: usize) -> (f64, f64) {
        match self.config.target_accept {
            Some(t) => (t, t),
            None => (if k == 1 { 0.44 } else { 0.234 }, 0.44),
        }
    }

    /// Runs steps 1 to 8 once, then adapts step sizes if still in burn-in.
    pub fn step<R: rand::Rng + ?Sized>(&mut self, model: &Model, state: &mut ModelState, anchored: &[bool], rng: &mut R) {
        let fixed = self.config.fixed;
        if !fixed.linkage {
            for _ in 0..self.config.repeats {
                let c = update_linkage(model, state, anchored, self.config.linkage_ratio, rng);
                self.linkage.add(c);
            }
        }
        if !fixed.distortions {
            update_distortions(model, state, rng);
        }
        if !fixed.latent_profiles {
            update_latent_profiles(model, state, rng);
        }
        if !fixed.positions {
            let c = update_positions(model, state, self.step_u, rng);
            self.positions.add(c);
            self.window_positions.add(c);
        }
        if !fixed.psi {
            update_psi(model, state, rng);
        }
        if !fixed.theta {
            update_theta(model, state, rng);
        }
        if !fixed.beta {
            let cs = update_beta(model, state, &self.step_beta, rng);
            for (j, c) in cs.into_iter().enumerate() {
                self.beta[j].add(c);
                self.window_beta[j].add(c);
            }
        }
        if !fixed.sigma2 {
            update_sigma2(model, state, rng);
        }

        self.iteration += 1;
        let cfg = &self.config;
        if cfg.adapt && self.iteration <= cfg.burn_in && self.iteration.is_multiple_of(cfg.adapt_window) {
            let (t_u, t_beta) = self.targets(model.k());
            if self.window_positions.proposed > 0 {
                self.step_u = adapt_step_size(self.step_u, self.window_positions.rate(), t_u);
            }
            for (s, w) in self.step_beta.iter_mut().zip(&self.window_beta) {
                if w.proposed > 0 {
                    *s = adapt_step_size(*s, w.rate(), t_beta);
                }
            }
            self.window_positions = MoveCount::default();
            self.window_beta.iter_mut().for_each(|w| *w = MoveCount::default());
        }
        if self.iteration == cfg.burn_in {
            self.reset_counts();
        }
    }

    fn reset_counts(&mut self) {
        self.linkage = MoveCount::default();
        self.positions = MoveCount::default();
        self.beta.iter_mut().for_each(|c| *c = MoveCount::default());
    }

    pub fn acceptance(&self) -> AcceptanceRates {
        AcceptanceRates {
            linkage: self.linkage.rate(),
            positions: self.positions.rate(),
            beta: self.beta.iter().map(MoveCount::rate).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub linkage: f64,
    pub positions: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl TraceSummary {
    pub fn new(name: &str, xs: &[f64]) -> Self {
        TraceSummary {
            name: name.to_string(),
            mean: stats::mean(xs),
            sd: stats::sd(xs),
            ess: stats::effective_sample_size(xs),
            q05: stats::quantile(xs, 0.05),
            q50: stats::quantile(xs, 0.5),
            q95: stats::quantile(xs, 0.95),
        }
    }
}

/// Post-burn-in acceptance rates, tuned step sizes and trace summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub iterations: usize,
    pub acceptance: AcceptanceRates,
    pub step_u: f64,
    pub step_beta: Vec<f64>,
    pub summaries: Vec<TraceSummary>,
}

/// Thinned post-burn-in draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSampleSet {
    pub n_records: usize,
    pub k: usize,
    /// One row per sample: cluster labels `1..=N` in record order.
    pub labels: Vec<Vec<u32>>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub n_clusters: Vec<usize>,
    pub n_pairs: Vec<usize>,
    /// Total log-likelihood of the stored state (sum of the pointwise units).
    pub loglik: Vec<f64>,
    pub pointwise: PointwiseLogLik,
}

impl PosteriorSampleSet {
    pub fn new(n_records: usize, k: usize, pointwise: PointwiseLogLik) -> Self {
        PosteriorSampleSet {
            n_records,
            k,
            labels: Vec::new(),
            beta: Vec::new(),
            sigma2: Vec::new(),
            psi: Vec::new(),
            n_clusters: Vec::new(),
            n_pairs: Vec::new(),
            loglik: Vec::new(),
            pointwise,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn linkage(&self, sample: usize, data: &Dataset) -> Result<LinkageStructure> {
        let l: Vec<usize> = self.labels[sample].iter().map(|&x| x as usize).collect();
        LinkageStructure::from_labels(data, &l)
    }

    /// Named scalar traces: `beta_j`, `sigma2`, `psi_l`, `n_clusters`,
    /// `n_pairs`, `loglik` (1-based file and field suffixes).
    pub fn scalar_traces(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        let n_files = self.beta.first().map_or(0, Vec::len);
        for j in 0..n_files {
            out.push((format!("beta_{}", j + 1), self.beta.iter().map(|b| b[j]).collect()));
        }
        out.push(("sigma2".into(), self.sigma2.clone()));
        let n_fields = self.psi.first().map_or(0, Vec::len);
        for l in 0..n_fields {
            out.push((format!("psi_{}", l + 1), self.psi.iter().map(|p| p[l]).collect()));
        }
        out.push(("n_clusters".into(), self.n_clusters.iter().map(|&n| n as f64).collect()));
        out.push(("n_pairs".into(), self.n_pairs.iter().map(|&n| n as f64).collect()));
        out.push(("loglik".into(), self.loglik.clone()));
        out
    }

    fn store(&mut self, model: &Model, state: &ModelState, scratch: &mut Vec<f64>) -> Result<()> {
        pointwise_loglik(model, state, scratch);
        self.pointwise.push(scratch)?;
        self.loglik.push(scratch.iter().sum());
        self.labels.push(state.linkage.canonical_labels());
        self.beta.push(state.globals.beta.clone());
        self.sigma2.push(state.globals.sigma2);
        self.psi.push(state.globals.psi.clone());
        self.n_clusters.push(state.linkage.n_clusters());
        self.n_pairs.push(state.linkage.n_pairs());
        Ok(())
    }
}

/// Checks the structural constraint and `w = 0 ⟹ p = π`.
pub(crate) fn check_invariants(model: &Model, state: &ModelState) -> Result<()> {
    state.validate_structure()?;
    if !model.terms.profile {
        return Ok(());
    }
    for r in 0..model.n_records() {
        let c = state.linkage.label(r);
        for l in 0..model.n_fields() {
            if let Some(p) = model.cell(r, l) {
                if !state.flags.get(r, l) && p != state.latent.profile(c, l) {
                    return Err(Error::Domain(format!(
                        "record {} field {} is undistorted but differs from its latent value",
                        r, l
                    )));
                }
            }
        }
    }
    Ok(())
}

/// A kernel bound to a model, a state and a seeded RNG.
pub struct Chain<'m, 'a> {
    model: &'m Model<'a>,
    kernel: Kernel,
    state: ModelState,
    anchored: Vec<bool>,
    rng: ChaCha8Rng,
}

impl<'m, 'a> Chain<'m, 'a> {
    pub fn new(model: &'m Model<'a>, config: SamplerConfig, anchors: Option<&PairSet>) -> Result<Self> {
        let kernel = Kernel::new(config, model.data.n_files())?;
        let mut rng = ChaCha8Rng::seed_from_u64(kernel.config.seed);
        let state = initial_state(model, anchors, &mut rng)?;
        Ok(Self::assemble(model, kernel, state, anchors, rng))
    }

    /// Starts from a given state; anchored pairs must already be linked.
    pub fn from_state(
        model: &'m Model<'a>,
        config: SamplerConfig,
        anchors: Option<&PairSet>,
        state: ModelState,
    ) -> Result<Self> {
        let kernel = Kernel::new(config, model.data.n_files())?;
        check_invariants(model, &state)?;
        if let Some(a) = anchors {
            for &(x, y) in a.pairs() {
                if state.linkage.partner(model.data.global(x)) != Some(model.data.global(y)) {
                    return Err(Error::Config(format!("anchor {x}-{y} is not linked in the starting state")));
                }
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(kernel.config.seed);
        Ok(Self::assemble(model, kernel, state, anchors, rng))
    }

    fn assemble(model: &'m Model<'a>, kernel: Kernel, state: ModelState, anchors: Option<&PairSet>, rng: ChaCha8Rng) -> Self {
        let mut anchored = vec![false; model.n_records()];
        if let Some(a) = anchors {
            for &(x, y) in a.pairs() {
                anchored[model.data.global(x)] = true;
                anchored[model.data.global(y)] = true;
            }
        }
        Chain {
            model,
            kernel,
            state,
            anchored,
            rng,
        }
    }

    pub fn step(&mut self) {
        self.kernel.step(self.model, &mut self.state, &self.anchored, &mut self.rng);
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn run(mut self) -> Result<(PosteriorSampleSet, ChainDiagnostics)> {
        let cfg = self.kernel.config.clone();
        let (n_net, n_prof) = crate::evaluation::information::unit_counts(self.model);
        let mut samples = PosteriorSampleSet::new(
            self.model.n_records(),
            self.model.k(),
            PointwiseLogLik::new(n_net, n_prof, cfg.store_pointwise),
        );
        let mut scratch = Vec::with_capacity(n_net + n_prof);
        while self.kernel.iteration() < cfg.iterations {
            self.step();
            let it = self.kernel.iteration();
            if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
                check_invariants(self.model, &self.state)?;
                samples.store(self.model, &self.state, &mut scratch)?;
            }
        }
        let summaries = samples
            .scalar_traces()
            .iter()
            .map(|(name, xs)| TraceSummary::new(name, xs))
            .collect();
        let diag = ChainDiagnostics {
            iterations: cfg.iterations,
            acceptance: self.kernel.acceptance(),
            step_u: self.kernel.step_u,
            step_beta: self.kernel.step_beta.clone(),
            summaries,
        };
        Ok((samples, diag))
    }
}

/// Initializes, runs and summarizes one chain.
pub fn run_chain(
    model: &Model,
    config: &SamplerConfig,
    anchors: Option<&PairSet>,
) -> Result<(PosteriorSampleSet, ChainDiagnostics)> {
    Chain::new(model, config.clone(), anchors)?.run()
}
