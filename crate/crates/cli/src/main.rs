//! `reclink`: batch front end for the record linkage sampler.

mod commands;
mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "reclink", version, about = "Bayesian record linkage with profile and network data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep cell of a config (or re-run a stored manifest).
    Run {
        /// A TOML run config, or the manifest.json of an earlier run.
        config: PathBuf,
        /// Output directory; overrides `run.output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides `run.threads`.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config and its data without sampling. Prints a JSON report.
    Validate { config: PathBuf },
    /// Simulate a dataset from a TOML spec.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision, recall and F1 of a predicted pair CSV against the truth.
    Eval {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Records per file, comma separated; inferred when absent.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Anchor pairs, to report recall restricted to them.
        #[arg(long)]
        anchors: Option<PathBuf>,
    },
    /// Greedy neighborhood-overlap matcher seeded by anchors.
    Baseline {
        #[arg(long)]
        network_a: PathBuf,
        #[arg(long)]
        network_b: PathBuf,
        /// Actors in each graph, e.g. `--sizes 120,130`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Draw this fraction of the truth as anchors.
        #[arg(long)]
        anchor_fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        anchor_seed: u64,
        #[arg(long, default_value_t = reclink::baseline::DEFAULT_CUTOFF)]
        cutoff: f64,
        /// Where to write the matched pairs.
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_run_config(path: &Path) -> Result<RunConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(run::read_manifest(path)?.config)
    } else {
        RunConfig::load(path)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, threads } => {
            let mut cfg = load_run_config(&config)?;
            if let Some(t) = threads {
                cfg.run.threads = t;
            }
            let out = out.unwrap_or_else(|| cfg.run.output.clone());
            let manifest = run::run(&cfg, &out)?;
            eprintln!(
                "{} cells, {} failed; results in {}",
                manifest.cells.len() + manifest.baseline.len(),
                manifest.failed_cells,
                out.display()
            );
            for c in manifest.cells.iter().chain(&manifest.baseline) {
                if let Some(e) = &c.error {
                    eprintln!("  {}: {e}", c.id);
                }
            }
            Ok(if manifest.failed_cells == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = config::validate(&cfg);
            print_json(&report)?;
            Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Synth { spec, out } => {
            print_json(&commands::synth(&spec, &out)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            predicted,
            truth,
            sizes,
            anchors,
        } => {
            print_json(&commands::eval(&predicted, &truth, sizes, anchors.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Baseline {
            network_a,
            network_b,
            sizes,
            anchors,
            truth,
            anchor_fraction,
            anchor_seed,
            cutoff,
            out,
        } => {
            if !(0.0..=1.0).contains(&cutoff) {
                bail!("cutoff {cutoff} is outside [0, 1]");
            }
            if sizes.len() != 2 {
                bail!("--sizes needs two values, got {}", sizes.len());
            }
            let args = commands::BaselineArgs {
                network_a: &network_a,
                network_b: &network_b,
                sizes: [sizes[0], sizes[1]],
                anchors: anchors.as_deref(),
                truth: truth.as_deref(),
                anchor_fraction,
                anchor_seed,
                cutoff,
                out: &out,
            };
            print_json(&commands::baseline(&args)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
