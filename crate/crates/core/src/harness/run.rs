//! Batch runs: one ViOlin run per seed, per-seed and aggregate CSVs, a
//! config snapshot and a manifest.
//!
//! Output directory layout:
//! - `config.toml`: the validated configuration as run;
//! - `seed-<seed>.csv`: one row per step;
//! - `aggregate.csv`: all seeds, ordered by `(seed, step)`;
//! - `manifest.txt`: versions, seeds, thresholds and the aggregate checksum.
//!
//! Reals are written with 17 significant digits. `standard_regret_prefix`
//! is `NaN` for families without a closed-form optimum.

use super::config::ExperimentConfig;
use super::instance::build_instance;
use crate::bandit::{run_violin, RunLedger, ViolinConfig};
use crate::error::{Result, ViolinError};
use crate::metrics::{find_local_max_set, local_regret, standard_regret_prefix, LocalMaxSet};
use crate::seeding::derive_seed;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CSV_COLUMNS: [&str; 11] = [
    "step",
    "seed",
    "real_reward",
    "virtual_reward",
    "delta1",
    "delta2",
    "delta3",
    "delta4",
    "queries",
    "local_regret_prefix",
    "standard_regret_prefix",
];

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub truth_index: usize,
    pub ledger: RunLedger,
    pub local_max: LocalMaxSet,
    pub local_regret_prefix: Vec<f64>,
    pub standard_regret_prefix: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub aggregate_sha256: Option<String>,
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let inst = build_instance(cfg, seed)?;
    let env = inst.truth();
    let th = cfg.effective_thresholds();
    let mut vcfg = ViolinConfig::new(cfg.horizon, cfg.learner, cfg.mode, derive_seed(seed, 1));
    vcfg.thresholds = th;
    let ledger = run_violin(env, &inst.set, &vcfg)?;
    let local_max = find_local_max_set(env, &th, cfg.local_max_budget, derive_seed(seed, 2))?;
    let rewards: Vec<f64> = ledger.steps.iter().map(|s| s.real_reward).collect();
    let local_regret_prefix = local_regret(&rewards, &local_max).signed_prefix;
    let standard_regret_prefix = match standard_regret_prefix(&rewards, env) {
        Ok(p) => Some(p),
        Err(ViolinError::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SeedResult {
        seed,
        truth_index: inst.truth_index,
        ledger,
        local_max,
        local_regret_prefix,
        standard_regret_prefix,
    })
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, r: &SeedResult) -> Result<()> {
    for (i, s) in r.ledger.steps.iter().enumerate() {
        let std_regret = r.standard_regret_prefix.as_ref().map_or(f64::NAN, |p| p[i]);
        w.write_record([
            s.step.to_string(),
            r.seed.to_string(),
            real(s.real_reward),
            real(s.virtual_reward),
            real(s.delta.d1),
            real(s.delta.d2),
            real(s.delta.d3),
            real(s.delta.d4),
            s.queries.to_string(),
            real(r.local_regret_prefix[i]),
            real(std_regret),
        ])
        .map_err(csv_err)?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> ViolinError {
    ViolinError::Io(std::io::Error::other(e))
}

/// CSV text for the given seed results, in the order given.
pub fn to_csv(results: &[&SeedResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in results {
        write_rows(&mut w, r)?;
    }
    w.into_inner().map_err(|e| ViolinError::Io(std::io::Error::other(e.to_string())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn manifest(cfg: &ExperimentConfig, results: &[SeedResult], aggregate_sha: Option<&str>) -> String {
    let th = cfg.effective_thresholds();
    let mut m = String::new();
    let _ = writeln!(m, "package = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "family = {}", cfg.family.name());
    let _ = writeln!(m, "horizon = {}", cfg.horizon);
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(m, "seeds = {}", seeds.join(","));
    let _ = writeln!(m, "thresholds = eps_g {:e}, eps_h {:e}", th.eps_g, th.eps_h);
    let _ = writeln!(m, "dry_run = {}", cfg.dry_run);
    for r in results {
        let _ = writeln!(
            m,
            "seed {}: truth_index {}, local_max_worst {:.16e}, local_max_exact {}, members_found {}",
            r.seed,
            r.truth_index,
            r.local_max.worst_value,
            r.local_max.exact,
            r.local_max.members.len()
        );
    }
    if let Some(h) = aggregate_sha {
        let _ = writeln!(m, "aggregate_sha256 = {h}");
    }
    m
}

fn write(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| ViolinError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Validates `cfg`, runs every seed (in parallel, `cfg.threads` workers)
/// and writes the artifacts. A dry run writes only the config snapshot and
/// the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| ViolinError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let mut files = Vec::new();
    write(&dir.join("config.toml"), cfg.to_toml()?.as_bytes(), &mut files)?;
    if cfg.dry_run {
        write(&dir.join("manifest.txt"), manifest(cfg, &[], None).as_bytes(), &mut files)?;
        return Ok(Artifacts {
            dir,
            files,
            aggregate_sha256: None,
        });
    }

    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| ViolinError::Config(format!("thread pool: {e}")))?;
    let results: Vec<SeedResult> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_seed(cfg, s))
            .collect::<Result<Vec<_>>>()
    })?;

    for r in &results {
        write(&dir.join(format!("seed-{}.csv", r.seed)), &to_csv(&[r])?, &mut files)?;
    }
    let aggregate = to_csv(&results.iter().collect::<Vec<_>>())?;
    let sha = sha256_hex(&aggregate);
    write(&dir.join("aggregate.csv"), &aggregate, &mut files)?;
    write(&dir.join("manifest.txt"), manifest(cfg, &results, Some(&sha)).as_bytes(), &mut files)?;
    Ok(Artifacts {
        dir,
        files,
        aggregate_sha256: Some(sha),
    })
}
