//! Experiment configuration, read from TOML.
//!
//! ```toml
//! family = "linear"          # linear | logistic | two-layer | sparse-linear
//! dim = 16
//! hypotheses = 16            # class size (ignored for sparse-linear)
//! horizon = 500
//! learner = "hedge"          # hedge | ftl
//! mode = "analytic"          # analytic | finite-diff
//! seeds = [0, 1, 2]
//! output_dir = "runs/linear"
//! # optional
//! hidden = 4                 # two-layer width
//! sparsity = 2               # sparse-linear support size
//! resolution = 0.3           # sparse-linear cover resolution
//! local_max_budget = 64      # random starts for the local-maximum search
//! threads = 4
//! dry_run = false
//! [thresholds]
//! eps_g = 0.1
//! eps_h = -0.5
//! ```
//!
//! `VIOLIN_OUTPUT_DIR` and `VIOLIN_THREADS` override `output_dir` and
//! `threads`.

use crate::bandit::SupervisionMode;
use crate::error::{Result, ViolinError};
use crate::learner::LearnerKind;
use crate::metrics::StationaryThresholds;
use crate::model::Family;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const ENV_OUTPUT_DIR: &str = "VIOLIN_OUTPUT_DIR";
pub const ENV_THREADS: &str = "VIOLIN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentFamily {
    Linear,
    Logistic,
    TwoLayer,
    /// Linear rewards over a cover of the `s`-sparse unit vectors.
    SparseLinear,
}

impl ExperimentFamily {
    /// The name used in config files.
    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Logistic => "logistic",
            Self::TwoLayer => "two-layer",
            Self::SparseLinear => "sparse-linear",
        }
    }

    pub fn model_family(self) -> Family {
        match self {
            Self::Linear | Self::SparseLinear => Family::Linear,
            Self::Logistic => Family::Logistic,
            Self::TwoLayer => Family::TwoLayer,
        }
    }
}

fn default_budget() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: ExperimentFamily,
    pub dim: usize,
    #[serde(default)]
    pub hypotheses: usize,
    pub horizon: usize,
    pub learner: LearnerKind,
    pub mode: SupervisionMode,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default = "default_budget")]
    pub local_max_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub dry_run: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<StationaryThresholds>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ViolinError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, applies environment overrides, validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ViolinError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ViolinError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_overrides(std::env::var(ENV_OUTPUT_DIR).ok(), std::env::var(ENV_THREADS).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies override values as read from the environment.
    pub fn apply_overrides(&mut self, output_dir: Option<String>, threads: Option<String>) -> Result<()> {
        if let Some(dir) = output_dir.filter(|s| !s.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(t) = threads.filter(|s| !s.is_empty()) {
            let n = t
                .parse::<usize>()
                .map_err(|_| ViolinError::Config(format!("{ENV_THREADS} must be a positive integer, got `{t}`")))?;
            self.threads = Some(n);
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ViolinError::Config(e.to_string()))
    }

    /// Thresholds in effect: the configured ones or the family default.
    pub fn effective_thresholds(&self) -> StationaryThresholds {
        self.thresholds
            .unwrap_or_else(|| StationaryThresholds::default_for(self.family.model_family()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ViolinError::Config(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        if self.local_max_budget == 0 {
            return bad("local_max_budget must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }
        match self.family {
            ExperimentFamily::SparseLinear => {
                let Some(s) = self.sparsity else {
                    return bad("sparse-linear requires `sparsity`".into());
                };
                if s == 0 || s > self.dim {
                    return bad(format!("sparsity must lie in 1..={}, got {s}", self.dim));
                }
                match self.resolution {
                    Some(r) if r > 0.0 && r < 1.0 => {}
                    _ => return bad("sparse-linear requires `resolution` in (0, 1)".into()),
                }
            }
            _ => {
                if self.hypotheses == 0 {
                    return bad("hypotheses must be at least 1".into());
                }
            }
        }
        if self.family == ExperimentFamily::TwoLayer && self.hidden == Some(0) {
            return bad("hidden must be at least 1".into());
        }
        if let Some(th) = self.thresholds {
            if !(th.eps_g > 0.0 && th.eps_g.is_finite() && th.eps_h.is_finite()) {
                return bad("thresholds need eps_g > 0 and finite eps_h".into());
            }
        }
        Ok(())
    }
}
