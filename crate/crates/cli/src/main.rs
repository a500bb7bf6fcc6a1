//! Command-line front end for the publish / attack / evaluate pipeline.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable input,
//! 3 privacy violation, 4 published area outside the attacker's band,
//! 5 prediction / ground-truth id mismatch.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trajattack::experiment::{self, ExperimentConfig, Method};
use trajattack::Result;

#[derive(Parser)]
#[command(
    name = "trajattack",
    version,
    about = "Publish confidence-bounded trajectory regions and attack them"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `out_dir`, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate the corpus: trajectories.jsonl, grid.json, ingest_report.json.
    Ingest {
        /// Dataset files or directories; overrides the config's inputs.
        paths: Vec<PathBuf>,
    },
    /// Publish regions for every trajectory: published.jsonl.
    Publish,
    /// Run one attacker on published.jsonl.
    Attack {
        #[arg(long, value_parser = parse_method)]
        method: Method,
    },
    /// Score predictions against the ground truth.
    Evaluate {
        /// Methods to score; defaults to the config's methods.
        #[arg(long, value_parser = parse_method)]
        method: Vec<Method>,
    },
    /// Evaluate every combination of the config's sweep axes: sweep.csv.
    Sweep { paths: Vec<PathBuf> },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: trajattack::Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli
        .config
        .ok_or_else(|| trajattack::Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Ingest { paths } => {
            let r = experiment::cmd_ingest(&cfg, &paths, &out)?;
            println!(
                "ingested {} trajectories ({} steps, {} skipped rows)",
                r.trajectories, r.steps, r.skipped_rows
            );
        }
        Command::Publish => {
            let pubs = experiment::cmd_publish(&cfg, &out)?;
            println!("published {} trajectories", pubs.len());
        }
        Command::Attack { method } => {
            let run = experiment::cmd_attack(&cfg, method, &out)?;
            println!(
                "{method}: {} predictions, {} passes",
                run.predictions.len(),
                run.diagnostics.len()
            );
        }
        Command::Evaluate { method } => {
            let methods = if method.is_empty() { cfg.methods.clone() } else { method };
            for (m, r) in experiment::cmd_evaluate(&cfg, &methods, &out)? {
                println!("{m}: A2ED {:.3} m, AMED {:.3} m", r.a2ed_m, r.amed_m);
            }
        }
        Command::Sweep { paths } => {
            let rows = experiment::cmd_sweep(&cfg, &paths, &out)?;
            println!(
                "sweep: {} rows written to {}",
                rows.len() * 2,
                out.join(experiment::SWEEP).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
