//! Replication harness for the safe-exploration experiments.
//!
//! Three experiment drivers mirror the numerical studies: a relaxed-inspector
//! sweep over `(alpha, epsilon)` grids, the barrier learner on the unstable
//! grid, and the assured-vs-classic comparison on the narrow corridor. Each
//! driver runs seeded replications (in parallel, merged in run order so
//! output is byte-stable), and emits a single CSV holding per-run raw rows
//! plus summary rows with mean and standard error.
//!
//! Seeds derive from `(base_seed, run_index)` through a fixed mixing
//! function, so adding runs never perturbs earlier ones. The worker count is
//! capped by the `SAFE_EXPLORE_THREADS` environment variable.

pub mod bandit_sweep;
pub mod cli;
pub mod config;
pub mod corridor_run;
pub mod grid_run;
pub mod runner;
pub mod seeding;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Bandit(#[from] safe_explore_core::bandit::BanditError),
    #[error("{0}")]
    Env(#[from] safe_explore_core::envs::EnvError),
    #[error("{0}")]
    Mdp(#[from] safe_explore_core::mdp::MdpError),
    #[error("{0}")]
    Barrier(#[from] safe_explore_core::barrier::BarrierError),
    #[error("{0}")]
    Learner(#[from] safe_explore_core::assured::LearnerError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config file: {0}")]
    ConfigParse(#[from] serde_json::Error),
}
