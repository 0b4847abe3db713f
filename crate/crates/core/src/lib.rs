//! Simulation library for virtual ascent with an online model learner on
//! deterministic nonlinear bandits and deterministic-dynamics RL.
//!
//! The crate is organized bottom-up:
//! - [`model`]: reward families with analytic derivatives;
//! - [`learner`]: the supervision loss and finite-class online learners;
//! - [`bandit`]: the bandit loop and its diagnostics;
//! - [`rl`]: the policy-learning counterpart on a small MDP;
//! - [`baselines`]: comparison algorithms;
//! - [`hard`]: lower-bound instance generators and verifiers;
//! - [`metrics`]: local and standard regret;
//! - [`harness`]: configuration, batch runs and CSV output.

pub mod bandit;
pub mod baselines;
pub mod error;
pub mod hard;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rl;
pub mod seeding;

pub use error::{Result, ViolinError};
