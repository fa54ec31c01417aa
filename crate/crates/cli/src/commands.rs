//! The `synth`, `eval` and `baseline` subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use reclink::baseline::greedy_match;
use reclink::data::{
    generate_synthetic, load_dataset, load_network, load_pairs, read_pairs_raw, write_network, write_pairs,
    write_profiles, SyntheticSpec,
};
use reclink::evaluation::{confusion, precision_recall_f1, recall_on, ConfusionCounts};
use reclink::{Dataset, FieldKind, PairSet};

use crate::config::{DataConfig, Mode, RunConfig, RunSection};
use crate::output::{sha256_file, write_atomic, write_bytes_atomic};

fn core_write<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&Path) -> reclink::Result<()>,
{
    write_atomic(path, |t| f(t).map_err(anyhow::Error::from))
}

#[derive(Debug, Serialize)]
pub struct SynthSummary {
    pub n_records: usize,
    pub n_latent: usize,
    pub n_true_pairs: usize,
    pub densities: Vec<f64>,
    pub files: BTreeMap<String, String>,
}

/// Simulates a dataset and writes it with a ready-to-run `config.toml`.
pub fn synth(spec_path: &Path, out: &Path) -> Result<SynthSummary> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("cannot read {}", spec_path.display()))?;
    let spec: SyntheticSpec = toml::from_str(&text).with_context(|| format!("invalid spec {}", spec_path.display()))?;
    let syn = generate_synthetic(&spec)?;
    let data = &syn.dataset;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let mut data_cfg = DataConfig {
        truth: Some("truth.csv".into()),
        ..Default::default()
    };
    for j in 0..data.n_files() {
        if data.n_fields() > 0 {
            let name = format!("profiles_{}.csv", j + 1);
            let p = out.join(&name);
            core_write(&p, |t| write_profiles(t, &data.profiles[j], &data.fields))?;
            written.push(p);
            data_cfg.profiles.push(name.into());
        }
        let name = format!("network_{}.txt", j + 1);
        let p = out.join(&name);
        core_write(&p, |t| write_network(t, &data.networks[j]))?;
        written.push(p);
        data_cfg.networks.push(name.into());
    }
    if data.n_fields() == 0 {
        data_cfg.sizes = Some(data.file_sizes());
    }
    data_cfg.string_fields = data
        .fields
        .iter()
        .filter(|f| f.kind == FieldKind::StringValued)
        .map(|f| f.name.clone())
        .collect();
    let p = out.join("truth.csv");
    core_write(&p, |t| write_pairs(t, syn.truth.pairs()))?;
    written.push(p);

    let mut latent = String::from("record,file,index,latent\n");
    for (r, l) in syn.labels.iter().enumerate() {
        let rr = data.record(r);
        latent.push_str(&format!("{},{},{},{}\n", r + 1, rr.file + 1, rr.index + 1, l + 1));
    }
    let p = out.join("latent.csv");
    write_bytes_atomic(&p, latent.as_bytes())?;
    written.push(p);

    let modes = if data.n_fields() > 0 {
        vec![Mode::Pm, Mode::Pnm]
    } else {
        vec![Mode::NetworkOnly]
    };
    let cfg = RunConfig {
        data: data_cfg,
        run: RunSection {
            modes,
            k: vec![spec.k],
            ..Default::default()
        },
        sampler: Default::default(),
        hyper: Default::default(),
    };
    let p = out.join("config.toml");
    write_bytes_atomic(&p, toml::to_string(&cfg)?.as_bytes())?;
    written.push(p);

    let mut files = BTreeMap::new();
    for p in &written {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, sha256_file(p)?);
    }
    Ok(SynthSummary {
        n_records: data.n_records(),
        n_latent: syn.n_latent,
        n_true_pairs: syn.truth.len(),
        densities: data.networks.iter().map(|a| a.density()).collect(),
        files,
    })
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub n_predicted: usize,
    pub n_truth: usize,
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    #[serde(rename = "F1")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchored_recall: Option<f64>,
    /// Whether the file sizes were given or inferred from the largest index.
    pub sizes_inferred: bool,
    pub sizes: Vec<usize>,
}

fn bare_dataset(sizes: &[usize]) -> Result<Dataset> {
    Ok(load_dataset::<PathBuf>(&[], &[], &BTreeMap::new(), Some(sizes))?)
}

/// Metrics of a predicted pair CSV against a truth CSV.
pub fn eval(predicted: &Path, truth: &Path, sizes: Option<Vec<usize>>, anchors: Option<&Path>) -> Result<EvalReport> {
    let sizes_inferred = sizes.is_none();
    let sizes = match sizes {
        Some(s) => s,
        None => {
            let mut s: Vec<usize> = Vec::new();
            for p in [Some(predicted), Some(truth), anchors].into_iter().flatten() {
                for (a, b) in read_pairs_raw(p)? {
                    for r in [a, b] {
                        if s.len() <= r.file {
                            s.resize(r.file + 1, 0);
                        }
                        s[r.file] = s[r.file].max(r.index + 1);
                    }
                }
            }
            if s.len() < 2 {
                s.resize(2, 0);
            }
            s.iter_mut().for_each(|n| *n = (*n).max(1));
            s
        }
    };
    let data = bare_dataset(&sizes)?;
    let pred = load_pairs(predicted, &sizes)?;
    let t = load_pairs(truth, &sizes)?;
    let c = confusion(&pred, &t, &data)?;
    let m = precision_recall_f1(&c);
    let anchored_recall = match anchors {
        Some(a) => recall_on(&pred, &load_pairs(a, &sizes)?),
        None => None,
    };
    Ok(EvalReport {
        n_predicted: pred.len(),
        n_truth: t.len(),
        counts: c,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        anchored_recall,
        sizes_inferred,
        sizes,
    })
}

#[derive(Debug, Serialize)]
pub struct BaselineReport {
    pub method: &'static str,
    pub cutoff: f64,
    pub n_anchors: usize,
    pub n_linked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(rename = "F1", skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

pub struct BaselineArgs<'a> {
    pub network_a: &'a Path,
    pub network_b: &'a Path,
    pub sizes: [usize; 2],
    pub anchors: Option<&'a Path>,
    pub truth: Option<&'a Path>,
    pub anchor_fraction: Option<f64>,
    pub anchor_seed: u64,
    pub cutoff: f64,
    pub out: &'a Path,
}

/// Greedy Ω matcher on two graphs, seeded by anchors.
pub fn baseline(args: &BaselineArgs) -> Result<BaselineReport> {
    let sizes = args.sizes.to_vec();
    let g_a = load_network(args.network_a, 0, sizes[0])?;
    let g_b = load_network(args.network_b, 1, sizes[1])?;
    let truth = args.truth.map(|p| load_pairs(p, &sizes)).transpose()?;
    let anchors = match (args.anchors, args.anchor_fraction) {
        (Some(_), Some(_)) => bail!("give either --anchors or --anchor-fraction, not both"),
        (Some(p), None) => load_pairs(p, &sizes)?,
        (None, Some(f)) => {
            if !(0.0..=1.0).contains(&f) {
                bail!("anchor fraction {f} is outside [0, 1]");
            }
            let t = truth.as_ref().context("--anchor-fraction needs --truth")?;
            t.sample_fraction(f, &mut ChaCha8Rng::seed_from_u64(args.anchor_seed))
        }
        (None, None) => PairSet::default(),
    };
    let est = greedy_match(&g_a, &g_b, &anchors, args.cutoff)?;
    core_write(args.out, |t| write_pairs(t, est.pairs.pairs()))?;
    let mut report = BaselineReport {
        method: "omega_baseline (greedy stand-in, not CRF inference)",
        cutoff: args.cutoff,
        n_anchors: anchors.len(),
        n_linked: est.pairs.len(),
        precision: None,
        recall: None,
        f1: None,
    };
    if let Some(t) = &truth {
        let m = precision_recall_f1(&confusion(&est.pairs, t, &bare_dataset(&sizes)?)?);
        report.precision = m.precision;
        report.recall = m.recall;
        report.f1 = m.f1;
    }
    Ok(report)
}
