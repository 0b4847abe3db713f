//! Configuration, batch runs, CSV artifacts and reports.

pub mod checks;
pub mod config;
pub mod instance;
pub mod report;
pub mod run;

pub use checks::{run_checks, CheckOutcome, CHECKS};
pub use config::{ExperimentConfig, ExperimentFamily, ENV_OUTPUT_DIR, ENV_THREADS};
pub use instance::{build_instance, random_two_layer, Instance};
pub use report::{format_report, summarize_csv, SeedSummary};
pub use run::{run_experiment, run_seed, sha256_hex, to_csv, Artifacts, SeedResult, CSV_COLUMNS};
