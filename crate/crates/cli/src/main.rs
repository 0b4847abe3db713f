//! `violin`: run experiments, property checks, packings and reports.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use violin_core::hard::build_packing;
use violin_core::harness::{format_report, run_checks, run_experiment, summarize_csv, ExperimentConfig};

#[derive(Parser)]
#[command(name = "violin", version, about = "Virtual ascent with an online model learner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Validate and write the manifest only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run property checks: all, packing, eluder, sparse-search,
    /// telescoping or clipped-moment.
    Check {
        #[arg(default_value = "all")]
        selector: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a greedy sphere packing and write it as plain text.
    Packing {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        attempts: usize,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Summarize an aggregate CSV per seed.
    Report { csv: PathBuf },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, dry_run } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.dry_run |= dry_run;
            let art = run_experiment(&cfg).with_context(|| format!("running {}", config.display()))?;
            for f in &art.files {
                println!("wrote {}", f.display());
            }
            if let Some(h) = art.aggregate_sha256 {
                println!("aggregate sha256 {h}");
            }
        }
        Command::Check { selector, seed } => {
            let outcomes = run_checks(&selector, seed)?;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            if outcomes.iter().any(|o| !o.passed) {
                bail!("some checks failed");
            }
        }
        Command::Packing {
            dim,
            separation,
            seed,
            attempts,
            output,
        } => {
            let p = build_packing(dim, separation, seed, attempts)?;
            match output {
                Some(path) => {
                    std::fs::write(&path, p.to_text()).with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("{} points written to {}", p.len(), path.display());
                }
                None => print!("{}", p.to_text()),
            }
        }
        Command::Report { csv } => {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            print!("{}", format_report(&summarize_csv(&text)?));
        }
    }
    Ok(())
}
