//! Human-AI collaborative matching.
//!
//! An algorithmic policy assigns `n - b` individuals to capacity-limited
//! resources by solving a maximum-weight imperfect bipartite matching on
//! classifier confidence scores; the remaining `b` individuals are deferred to
//! a human decision maker who sees more accurate success scores. A UCB1 bandit
//! over `b` learns how many decisions to defer.
//!
//! Modules:
//!
//! - [`matching`]: instances, the exact solver and a brute-force oracle.
//! - [`scoregen`]: synthetic patient pools with Beta-quantile success scores.
//! - [`human`]: simulated, truncated and replayed human policies.
//! - [`bandit`]: UCB1 over the deferral count, rewards and regret.
//! - [`experiment`]: realization fan-out, per-arm summaries, CSV output.
//! - [`session`]: live human sessions and their HTTP surface.

pub mod bandit;
pub mod error;
pub mod experiment;
pub mod human;
pub mod matching;
pub mod rng;
pub mod scoregen;
pub mod session;

pub use error::{Error, Result};
pub use matching::{
    brute_force_matching, matching_utility, residual, solve_imperfect_matching, MatchInstance,
    Matching, ResidualInstance, ResourceSet, ScoreMatrix, Scores,
};
