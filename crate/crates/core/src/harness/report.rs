//! Per-seed summary of an aggregate CSV.

use super::run::CSV_COLUMNS;
use crate::error::{Result, ViolinError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub steps: usize,
    pub final_local_regret: f64,
    pub final_standard_regret: f64,
    /// Mean real reward over the last tenth of the run.
    pub tail_reward: f64,
    pub queries: u64,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> ViolinError {
    ViolinError::Config(format!("csv line {line}: {msg}"))
}

pub fn summarize_csv(text: &str) -> Result<Vec<SeedSummary>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(ViolinError::Config("csv header does not match the run schema".into()));
    }
    let mut rows: BTreeMap<u64, Vec<(f64, f64, f64, u64)>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| parse_err(line, format!("{}: {e}", CSV_COLUMNS[i])));
        let seed = rec[1].parse::<u64>().map_err(|e| parse_err(line, e))?;
        let queries = rec[8].parse::<u64>().map_err(|e| parse_err(line, e))?;
        rows.entry(seed).or_default().push((f(2)?, f(9)?, f(10)?, queries));
    }
    Ok(rows
        .into_iter()
        .map(|(seed, r)| {
            let last = r[r.len() - 1];
            let tail = (r.len() / 10).max(1);
            let tail_reward = r[r.len() - tail..].iter().map(|x| x.0).sum::<f64>() / tail as f64;
            SeedSummary {
                seed,
                steps: r.len(),
                final_local_regret: last.1,
                final_standard_regret: last.2,
                tail_reward,
                queries: last.3,
            }
        })
        .collect())
}

/// Fixed-width table of the summaries.
pub fn format_report(rows: &[SeedSummary]) -> String {
    let mut s = format!(
        "{:>8} {:>7} {:>14} {:>14} {:>12} {:>9}\n",
        "seed", "steps", "local_regret", "std_regret", "tail_reward", "queries"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>8} {:>7} {:>14.6} {:>14.6} {:>12.6} {:>9}",
            r.seed, r.steps, r.final_local_regret, r.final_standard_regret, r.tail_reward, r.queries
        );
    }
    s
}
