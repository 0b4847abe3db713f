//! Comparison algorithms: tightest UCB over a finite class, two-point
//! zeroth-order ascent, sparse support search and model-free REINFORCE.

pub mod reinforce_rl;
pub mod sparse_search;
pub mod ucb;
pub mod zeroth_order;

pub use reinforce_rl::{reinforce_baseline_rl, ReinforceConfig};
pub use sparse_search::{query_bound, sparse_binary_search, RawLinearOracle, SparseSearchResult};
pub use ucb::{run_ucb_tightest, trap_candidates, trap_optimum, ucb_tightest_step, ConsistencySet, UcbLedger};
pub use zeroth_order::{zeroth_order_ascent, StepSchedule, ZerothOrderConfig, ZerothOrderLedger};
