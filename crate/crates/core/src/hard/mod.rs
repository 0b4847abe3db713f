//! Lower-bound constructions: sphere packings, ReLU needles, the optimism
//! trap, a noisy basis bandit and Eluder-independent sequences.

pub mod basis;
pub mod eluder;
pub mod needle;
pub mod packing;
pub mod trap;

pub use basis::{identification_success, identify_best_arm, StochasticBasis};
pub use eluder::{eluder_sequence_relu, eluder_sequence_sparse, verify_eluder, EluderSequence, Witness};
pub use needle::{needle_width_limit, random_probe_success, relu_needle_family, ProbeDistribution};
pub use packing::{build_packing, build_packing_capped, random_unit, SpherePacking};
pub use trap::{build_ucb_trap, UcbTrapInstance, TRAP_SEPARATION};
