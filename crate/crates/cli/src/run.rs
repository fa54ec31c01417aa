//! The `run` pipeline: one chain per sweep cell, then estimates, metrics,
//! information criteria and a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use reclink::baseline::greedy_match;
use reclink::data::write_pairs;
use reclink::estimator::{
    binder_point_estimate, match_probabilities, mpmms_point_estimate, population_size_posterior, EstimatorKind,
};
use reclink::evaluation::{confusion, precision_recall_f1, recall_on, CriterionReport};
use reclink::model::HyperParams;
use reclink::sampler::{write_linkage_samples, write_traces_csv};
use reclink::{run_chain, Dataset, Model, PairSet, PosteriorLinkage};

use crate::config::{Cell, RunConfig};
use crate::output::{sha256_bytes, sha256_file, write_atomic, write_bytes_atomic};

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.csv";
pub const CRITERIA: &str = "criteria.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    pub cells: Vec<CellEntry>,
    pub baseline: Vec<CellEntry>,
    /// SHA-256 of the summary tables.
    pub tables: BTreeMap<String, String>,
    pub failed_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub id: String,
    pub mode: String,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub anchor_fraction: f64,
    pub n_anchors: usize,
    pub seed: u64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// SHA-256 of every file the cell wrote, keyed by path relative to the
    /// run directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
struct MetricsRow {
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    anchored_recall: Option<f64>,
    n_linked: usize,
    population_mean: Option<f64>,
    population_sd: Option<f64>,
    linkage_acceptance: Option<f64>,
}

struct CellResult {
    entry: CellEntry,
    metrics: Option<MetricsRow>,
    estimator: EstimatorKind,
    criteria: Option<CriterionReport>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn anchors_for(truth: Option<&PairSet>, fraction: f64, seed: u64) -> PairSet {
    match truth {
        Some(t) if fraction > 0.0 => t.sample_fraction(fraction, &mut ChaCha8Rng::seed_from_u64(seed)),
        _ => PairSet::default(),
    }
}

fn accuracy(est: &PosteriorLinkage, truth: Option<&PairSet>, anchors: &PairSet, data: &Dataset) -> Result<MetricsRow> {
    let mut row = MetricsRow {
        n_linked: est.pairs.len(),
        anchored_recall: recall_on(&est.pairs, anchors),
        ..Default::default()
    };
    if let Some(t) = truth {
        let m = precision_recall_f1(&confusion(&est.pairs, t, data)?);
        row.precision = m.precision;
        row.recall = m.recall;
        row.f1 = m.f1;
    }
    Ok(row)
}

fn record(outputs: &mut BTreeMap<String, String>, root: &Path, path: &Path) -> Result<()> {
    let rel = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
    outputs.insert(rel, sha256_file(path).with_context(|| format!("cannot hash {}", path.display()))?);
    Ok(())
}

fn write_core<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&Path) -> reclink::Result<()>,
{
    write_atomic(path, |tmp| f(tmp).map_err(anyhow::Error::from))
}

fn run_cell(
    cfg: &RunConfig,
    data: &Dataset,
    truth: Option<&PairSet>,
    cell: Cell,
    root: &Path,
    entry: &mut CellEntry,
) -> Result<(MetricsRow, CriterionReport)> {
    let anchors = anchors_for(truth, cell.fraction, cfg.run.anchor_seed);
    entry.n_anchors = anchors.len();
    let hyper = HyperParams::resolve(data, cell.k, &cfg.hyper)?;
    let model = Model::new(data, hyper, cell.mode.terms())?;
    let anchor_arg = (!anchors.is_empty()).then_some(&anchors);
    let (samples, diag) = run_chain(&model, &cfg.sampler, anchor_arg)?;

    let table = match_probabilities(&samples.labels, data)?;
    let est = match cfg.run.estimator {
        EstimatorKind::Mpmms => mpmms_point_estimate(&samples.labels, data)?,
        _ => binder_point_estimate(&table, cfg.run.loss_ratio)?,
    };
    let pop = population_size_posterior(&samples.labels)?;
    let criteria = CriterionReport::new(cell.k, &samples.pointwise, cfg.run.criteria_subset)?;
    let mut metrics = accuracy(&est, truth, &anchors, data)?;
    metrics.population_mean = Some(pop.mean);
    metrics.population_sd = Some(pop.sd);
    metrics.linkage_acceptance = Some(diag.acceptance.linkage);

    let dir = root.join("cells").join(&entry.id);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut files: Vec<PathBuf> = Vec::new();
    let p = dir.join("match_probabilities.csv");
    write_core(&p, |t| table.write_csv(t))?;
    files.push(p);
    let p = dir.join("point_estimate.csv");
    write_core(&p, |t| write_pairs(t, est.pairs.pairs()))?;
    files.push(p);
    let p = dir.join("anchors.csv");
    write_core(&p, |t| write_pairs(t, anchors.pairs()))?;
    files.push(p);
    let p = dir.join("traces.csv");
    write_core(&p, |t| write_traces_csv(t, &samples))?;
    files.push(p);
    let mut hist = String::from("N,count\n");
    for (n, c) in &pop.histogram {
        writeln!(hist, "{n},{c}").unwrap();
    }
    let p = dir.join("population.csv");
    write_bytes_atomic(&p, hist.as_bytes())?;
    files.push(p);
    let p = dir.join("diagnostics.json");
    write_bytes_atomic(&p, &serde_json::to_vec_pretty(&diag)?)?;
    files.push(p);
    if cfg.run.save_samples {
        let p = dir.join("linkage_samples.txt");
        write_core(&p, |t| write_linkage_samples(t, &samples))?;
        files.push(p);
    }
    for f in &files {
        record(&mut entry.outputs, root, f)?;
    }
    Ok((metrics, criteria))
}

fn run_baseline(
    cfg: &RunConfig,
    data: &Dataset,
    truth: Option<&PairSet>,
    fraction: f64,
    root: &Path,
    entry: &mut CellEntry,
) -> Result<MetricsRow> {
    let anchors = anchors_for(truth, fraction, cfg.run.anchor_seed);
    entry.n_anchors = anchors.len();
    let est = greedy_match(&data.networks[0], &data.networks[1], &anchors, cfg.run.baseline_cutoff)?;
    let dir = root.join("cells").join(&entry.id);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let p = dir.join("point_estimate.csv");
    write_core(&p, |t| write_pairs(t, est.pairs.pairs()))?;
    record(&mut entry.outputs, root, &p)?;
    accuracy(&est, truth, &anchors, data)
}

fn entry(id: String, mode: &str, k: Option<usize>, fraction: f64, seed: u64) -> CellEntry {
    CellEntry {
        id,
        mode: mode.to_string(),
        k,
        anchor_fraction: fraction,
        n_anchors: 0,
        seed,
        status: "ok".into(),
        error: None,
        outputs: BTreeMap::new(),
    }
}

fn finish<T>(mut e: CellEntry, r: Result<T>) -> (CellEntry, Option<T>) {
    match r {
        Ok(v) => (e, Some(v)),
        Err(err) => {
            e.status = "failed".into();
            e.error = Some(format!("{err:#}"));
            e.outputs.clear();
            (e, None)
        }
    }
}

fn metrics_csv(results: &[CellResult]) -> String {
    let mut s = String::from(
        "cell,mode,K,anchor_fraction,estimator,n_anchors,n_linked,precision,recall,F1,anchored_recall,E_N,sd_N,linkage_acceptance\n",
    );
    for r in results {
        let Some(m) = &r.metrics else { continue };
        let e = &r.entry;
        let est = serde_json::to_value(r.estimator).unwrap();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.id,
            e.mode,
            e.k.map_or_else(String::new, |k| k.to_string()),
            e.anchor_fraction,
            est.as_str().unwrap_or_default(),
            e.n_anchors,
            m.n_linked,
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.f1),
            fmt_opt(m.anchored_recall),
            fmt_opt(m.population_mean),
            fmt_opt(m.population_sd),
            fmt_opt(m.linkage_acceptance),
        )
        .unwrap();
    }
    s
}

fn criteria_csv(results: &[CellResult]) -> String {
    let mut s = String::from("cell,mode,K,anchor_fraction,subset,n_samples,DIC,pD,WAIC,pWAIC,lppd\n");
    for r in results {
        let Some(c) = &r.criteria else { continue };
        let e = &r.entry;
        let subset = serde_json::to_value(c.subset).unwrap();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.id,
            e.mode,
            c.k,
            e.anchor_fraction,
            subset.as_str().unwrap_or_default(),
            c.n_samples,
            c.dic,
            c.p_dic,
            c.waic,
            c.p_waic,
            c.lppd
        )
        .unwrap();
    }
    s
}

/// Runs every cell of the sweep into `out` and returns the manifest.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    cfg.check()?;
    let (data, truth) = cfg.load_data()?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let root = std::path::absolute(out)?;

    let mut inputs = BTreeMap::new();
    for p in cfg.input_files() {
        inputs.insert(p.display().to_string(), sha256_file(p)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| anyhow!("cannot start worker pool: {e}"))?;
    let seed = cfg.sampler.seed;
    let mut results: Vec<CellResult> = pool.install(|| {
        cfg.cells()
            .into_par_iter()
            .map(|cell| {
                let mut e = entry(cell.id(), cell.mode.label(), Some(cell.k), cell.fraction, seed);
                let r = run_cell(cfg, &data, truth.as_ref(), cell, &root, &mut e);
                let (entry, v) = finish(e, r);
                let (metrics, criteria) = v.map_or((None, None), |(m, c)| (Some(m), Some(c)));
                CellResult {
                    entry,
                    metrics,
                    estimator: cfg.run.estimator,
                    criteria,
                }
            })
            .collect()
    });

    let mut baseline = Vec::new();
    if cfg.run.baseline {
        for &f in &cfg.run.anchor_fractions {
            let mut e = entry(format!("baseline_a{f}"), "baseline", None, f, cfg.run.anchor_seed);
            let r = run_baseline(cfg, &data, truth.as_ref(), f, &root, &mut e);
            let (entry, m) = finish(e, r);
            baseline.push(entry.clone());
            results.push(CellResult {
                entry,
                metrics: m,
                estimator: EstimatorKind::OmegaBaseline,
                criteria: None,
            });
        }
    }

    let mut tables = BTreeMap::new();
    for (name, body) in [(METRICS, metrics_csv(&results)), (CRITERIA, criteria_csv(&results))] {
        write_bytes_atomic(&root.join(name), body.as_bytes())?;
        tables.insert(name.to_string(), sha256_bytes(body.as_bytes()));
    }
    let n_cells = cfg.cells().len();
    let cells: Vec<CellEntry> = results.into_iter().take(n_cells).map(|r| r.entry).collect();
    let failed_cells = cells.iter().chain(&baseline).filter(|c| c.status != "ok").count();
    let mut config = cfg.clone();
    config.run.output = root.clone();
    let manifest = Manifest {
        tool: "reclink".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        inputs,
        cells,
        baseline,
        tables,
        failed_cells,
    };
    write_bytes_atomic(&root.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))
}
