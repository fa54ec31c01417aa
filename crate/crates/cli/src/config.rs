//! Run configuration: parsing, path resolution and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use reclink::baseline::DEFAULT_CUTOFF;
use reclink::data::{load_dataset, load_pairs};
use reclink::estimator::EstimatorKind;
use reclink::evaluation::UnitSubset;
use reclink::model::HyperConfig;
use reclink::{Dataset, FieldKind, LikelihoodTerms, PairSet, SamplerConfig};

use crate::output::sha256_file;

/// Which likelihood terms a cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Profile model.
    Pm,
    /// Profile and network model.
    Pnm,
    NetworkOnly,
}

impl Mode {
    pub fn terms(self) -> LikelihoodTerms {
        match self {
            Mode::Pm => LikelihoodTerms::PROFILE_ONLY,
            Mode::Pnm => LikelihoodTerms::ALL,
            Mode::NetworkOnly => LikelihoodTerms::NETWORK_ONLY,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Pm => "PM",
            Mode::Pnm => "PNM",
            Mode::NetworkOnly => "NetworkOnly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// One profile CSV per file. Leave empty for network-only data.
    #[serde(default)]
    pub profiles: Vec<PathBuf>,
    /// One edge list per file, in the same order as `profiles`.
    #[serde(default)]
    pub networks: Vec<PathBuf>,
    /// Actors per file; required when `profiles` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Ground-truth pairs. Needed for metrics and for anchor sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Profile columns to treat as string-valued.
    #[serde(default)]
    pub string_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub modes: Vec<Mode>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    pub anchor_fractions: Vec<f64>,
    pub anchor_seed: u64,
    pub estimator: EstimatorKind,
    pub loss_ratio: f64,
    pub criteria_subset: UnitSubset,
    pub output: PathBuf,
    /// Worker threads for the cell pool; 0 uses every core.
    pub threads: usize,
    /// Also run the neighborhood-overlap baseline once per anchor fraction.
    pub baseline: bool,
    pub baseline_cutoff: f64,
    /// Write the full linkage samples of every cell.
    pub save_samples: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            modes: vec![Mode::Pnm],
            k: vec![2],
            anchor_fractions: vec![0.0],
            anchor_seed: 0,
            estimator: EstimatorKind::Binder,
            loss_ratio: 1.0,
            criteria_subset: UnitSubset::All,
            output: PathBuf::from("reclink-out"),
            threads: 0,
            baseline: false,
            baseline_cutoff: DEFAULT_CUTOFF,
            save_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub hyper: HyperConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config and makes every relative path relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = std::path::absolute(&base).unwrap_or(base);
        cfg.rebase(&base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let d = &mut self.data;
        d.profiles.iter_mut().for_each(|p| *p = resolve(base, p));
        d.networks.iter_mut().for_each(|p| *p = resolve(base, p));
        d.truth = d.truth.as_ref().map(|p| resolve(base, p));
        self.run.output = resolve(base, &self.run.output);
    }

    pub fn input_files(&self) -> Vec<&PathBuf> {
        let d = &self.data;
        d.profiles.iter().chain(&d.networks).chain(&d.truth).collect()
    }

    pub fn field_kinds(&self) -> BTreeMap<String, FieldKind> {
        self.data
            .string_fields
            .iter()
            .map(|f| (f.clone(), FieldKind::StringValued))
            .collect()
    }

    pub fn load_data(&self) -> Result<(Dataset, Option<PairSet>)> {
        let d = &self.data;
        let data = load_dataset(&d.profiles, &d.networks, &self.field_kinds(), d.sizes.as_deref())?;
        let truth = d
            .truth
            .as_ref()
            .map(|p| load_pairs(p, &data.file_sizes()))
            .transpose()?;
        Ok((data, truth))
    }

    /// Sweep cells in a fixed order: mode, then K, then anchor fraction.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &mode in &self.run.modes {
            for &k in &self.run.k {
                for &fraction in &self.run.anchor_fractions {
                    out.push(Cell { mode, k, fraction });
                }
            }
        }
        out
    }

    /// Configuration problems that do not need the data loaded.
    pub fn static_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let d = &self.data;
        let r = &self.run;
        for p in self.input_files() {
            if !p.is_file() {
                issues.push(format!("missing file: {}", p.display()));
            }
        }
        if d.profiles.is_empty() && d.networks.is_empty() {
            issues.push("data: give `profiles`, `networks` or both".into());
        }
        if d.profiles.is_empty() && d.sizes.is_none() {
            issues.push("data: `sizes` is required without profile files".into());
        }
        if !d.profiles.is_empty() && !d.networks.is_empty() && d.profiles.len() != d.networks.len() {
            issues.push(format!(
                "data: {} profile files but {} network files",
                d.profiles.len(),
                d.networks.len()
            ));
        }
        if r.modes.is_empty() || r.k.is_empty() || r.anchor_fractions.is_empty() {
            issues.push("run: `modes`, `K` and `anchor_fractions` must be non-empty".into());
        }
        for &f in &r.anchor_fractions {
            if !(0.0..=1.0).contains(&f) {
                issues.push(format!("run: anchor fraction {f} is outside [0, 1]"));
            }
        }
        if r.anchor_fractions.iter().any(|&f| f > 0.0) && d.truth.is_none() {
            issues.push("run: anchor fractions above 0 need `data.truth`".into());
        }
        if r.k.contains(&0) {
            issues.push("run: K must be at least 1".into());
        }
        for &m in &r.modes {
            if m != Mode::NetworkOnly && d.profiles.is_empty() {
                issues.push(format!("run: mode {} needs profile files", m.label()));
            }
            if m != Mode::Pm && d.networks.is_empty() {
                issues.push(format!("run: mode {} needs network files", m.label()));
            }
        }
        if r.estimator == EstimatorKind::OmegaBaseline {
            issues.push("run: estimator must be binder or mpmms; enable `baseline` for the Ω matcher".into());
        }
        if !(r.loss_ratio > 0.0 && r.loss_ratio.is_finite()) {
            issues.push(format!("run: loss_ratio {} must be positive", r.loss_ratio));
        }
        if !(0.0..=1.0).contains(&r.baseline_cutoff) {
            issues.push(format!("run: baseline_cutoff {} is outside [0, 1]", r.baseline_cutoff));
        }
        if r.baseline && d.networks.len() != 2 {
            issues.push("run: the baseline needs exactly two network files".into());
        }
        if self.hyper.k.is_some() {
            issues.push("hyper: set the latent dimension with `run.K`, not `hyper.K`".into());
        }
        if let Err(e) = self.sampler.validate() {
            issues.push(format!("sampler: {e}"));
        }
        issues
    }

    pub fn check(&self) -> Result<()> {
        let issues = self.static_issues();
        if !issues.is_empty() {
            bail!("invalid configuration:\n  {}", issues.join("\n  "));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mode: Mode,
    pub k: usize,
    pub fraction: f64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{:?}_k{}_a{}", self.mode, self.k, self.fraction).to_lowercase()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<String>,
    pub digests: BTreeMap<String, String>,
    pub n_files: Option<usize>,
    pub n_records: Option<usize>,
    pub n_fields: Option<usize>,
    pub n_truth_pairs: Option<usize>,
    pub n_cells: usize,
    /// Rough peak memory of the sweep: the largest cell times the number of
    /// cells that can run at once.
    pub memory_estimate_bytes: Option<u64>,
}

pub fn validate(cfg: &RunConfig) -> ValidationReport {
    let mut issues = cfg.static_issues();
    let mut digests = BTreeMap::new();
    for p in cfg.input_files() {
        if let Ok(h) = sha256_file(p) {
            digests.insert(p.display().to_string(), h);
        }
    }
    let mut report = ValidationReport {
        ok: false,
        issues: Vec::new(),
        digests,
        n_files: None,
        n_records: None,
        n_fields: None,
        n_truth_pairs: None,
        n_cells: cfg.cells().len(),
        memory_estimate_bytes: None,
    };
    if issues.iter().all(|i| !i.starts_with("missing file")) {
        match cfg.load_data() {
            Ok((data, truth)) => {
                report.n_files = Some(data.n_files());
                report.n_records = Some(data.n_records());
                report.n_fields = Some(data.n_fields());
                report.n_truth_pairs = truth.as_ref().map(PairSet::len);
                for name in &cfg.data.string_fields {
                    if !data.fields.iter().any(|f| &f.name == name) {
                        issues.push(format!("data: string field `{name}` is not a profile column"));
                    }
                }
                report.memory_estimate_bytes = Some(memory_estimate(cfg, &data));
            }
            Err(e) => issues.push(format!("data: {e:#}")),
        }
    }
    report.ok = issues.is_empty();
    report.issues = issues;
    report
}

fn memory_estimate(cfg: &RunConfig, data: &Dataset) -> u64 {
    let n = data.n_records() as u64;
    let s = cfg.sampler.n_samples() as u64;
    let dyads: u64 = (0..data.n_files())
        .map(|j| {
            let m = data.file_size(j) as u64;
            m * m.saturating_sub(1) / 2
        })
        .sum();
    let cells_obs: u64 = n * data.n_fields() as u64;
    let units = dyads + cells_obs;
    let k_max = cfg.run.k.iter().copied().max().unwrap_or(1) as u64;
    let mut cell = s * n * 4 // labels
        + s * (2 * data.n_files() as u64 + data.n_fields() as u64 + 4) * 8 // traces
        + units * 3 * 8 // running pointwise summaries
        + n * (k_max * 8 + data.n_fields() as u64 * 5 + 32); // state
    if cfg.sampler.store_pointwise {
        cell += s * units * 8;
    }
    let parallel = match cfg.run.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(cfg.cells().len().max(1)) as u64;
    let shared: u64 = data.networks.iter().map(|a| a.n_edges() as u64 * 24).sum::<u64>() + n * 64;
    shared + cell * parallel
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse("[data]\nnetworks = [\"a.txt\", \"b.txt\"]\nsizes = [3, 4]\n").unwrap();
        assert_eq!(cfg.run.modes, vec![Mode::Pnm]);
        assert_eq!(cfg.run.k, vec![2]);
        assert_eq!(cfg.sampler, SamplerConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[data]\nnetworks = []\n[run]\nfoo = 1\n").is_err());
        assert!(RunConfig::parse("[data]\nnetworks = []\n[sampler]\niters = 1\n").is_err());
    }

    #[test]
    fn fraction_out_of_range_is_reported() {
        let mut cfg = RunConfig::parse("[data]\nnetworks = []\nsizes = [2, 2]\n").unwrap();
        cfg.run.anchor_fractions = vec![1.5];
        let issues = cfg.static_issues();
        assert!(issues.iter().any(|i| i.contains("1.5") && i.contains("outside [0, 1]")), "{issues:?}");
    }

    #[test]
    fn missing_file_is_named() {
        let cfg = RunConfig::parse("[data]\nnetworks = [\"/nope/a.txt\", \"/nope/b.txt\"]\nsizes = [2, 2]\n").unwrap();
        let issues = cfg.static_issues();
        assert!(issues.iter().any(|i| i == "missing file: /nope/a.txt"), "{issues:?}");
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let mut cfg = RunConfig::parse("[data]\nnetworks = [\"a.txt\"]\ntruth = \"/abs/t.csv\"\n").unwrap();
        cfg.rebase(Path::new("/base"));
        assert_eq!(cfg.data.networks[0], PathBuf::from("/base/a.txt"));
        assert_eq!(cfg.data.truth, Some(PathBuf::from("/abs/t.csv")));
        assert_eq!(cfg.run.output, PathBuf::from("/base/reclink-out"));
    }

    #[test]
    fn cell_order_and_ids() {
        let mut cfg = RunConfig::parse("[data]\nnetworks = []\n").unwrap();
        cfg.run.modes = vec![Mode::Pm, Mode::Pnm];
        cfg.run.k = vec![2, 3];
        cfg.run.anchor_fractions = vec![0.0, 0.5];
        let cells = cfg.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].id(), "pm_k2_a0");
        assert_eq!(cells[7].id(), "pnm_k3_a0.5");
    }
}
