//! Declarative experiment descriptions.
//!
//! Config files are JSON mirroring these field names, tagged by
//! `"experiment"`. CLI flags override config values; unset fields fall back
//! to desk-scale defaults (`--paper-scale` restores the published sizes).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::seeding::run_seed;
use crate::HarnessError;

/// Replication seeds: either an explicit list or a derived family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Derived { base_seed: u64, n_runs: usize },
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(seeds) => seeds.clone(),
            SeedSpec::Derived { base_seed, n_runs } => {
                (0..*n_runs as u64).map(|i| run_seed(*base_seed, i)).collect()
            }
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.seeds().is_empty() {
            return Err(HarnessError::Config("need at least one run".into()));
        }
        Ok(())
    }
}

/// Relaxed-inspector sweep over an `(alpha, epsilon)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSweepConfig {
    /// Arms per freshly sampled instance.
    pub n_arms: usize,
    /// Safety specification.
    pub mu: f64,
    /// Arm damage probabilities are uniform on `[arm_lo, arm_hi]`.
    pub arm_lo: f64,
    pub arm_hi: f64,
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
    pub seeds: SeedSpec,
    /// Horizon = this multiple of the relaxed detection-time bound.
    pub horizon_factor: f64,
    /// Fixed arm parameters (one per line) instead of per-run sampling.
    pub arm_file: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
}

impl BanditSweepConfig {
    /// Desk scale: 100 arms, 8 runs.
    pub fn desk(base_seed: u64) -> Self {
        BanditSweepConfig {
            n_arms: 100,
            mu: 0.1,
            arm_lo: 0.0,
            arm_hi: 0.2,
            epsilons: vec![0.02, 0.05, 0.08],
            alphas: vec![0.05, 0.1, 0.3],
            seeds: SeedSpec::Derived { base_seed, n_runs: 8 },
            horizon_factor: 10.0,
            arm_file: None,
            output_path: None,
        }
    }

    /// Published scale: 1000 arms, 16 runs.
    pub fn paper(base_seed: u64) -> Self {
        let mut cfg = Self::desk(base_seed);
        cfg.n_arms = 1000;
        cfg.seeds = SeedSpec::Derived { base_seed, n_runs: 16 };
        cfg
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        self.seeds.check()?;
        if self.n_arms == 0 {
            return Err(HarnessError::Config("n_arms must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(HarnessError::Config(format!("mu {} outside (0,1)", self.mu)));
        }
        if self.epsilons.is_empty() || self.alphas.is_empty() {
            return Err(HarnessError::Config("empty alpha or epsilon grid".into()));
        }
        for &eps in &self.epsilons {
            if !(eps > 0.0 && eps <= self.mu) {
                return Err(HarnessError::Config(format!(
                    "epsilon {eps} outside (0, mu = {}]",
                    self.mu
                )));
            }
        }
        for &alpha in &self.alphas {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(HarnessError::Config(format!("alpha {alpha} outside (0,1)")));
            }
        }
        if self.horizon_factor.is_nan() || self.horizon_factor <= 0.0 {
            return Err(HarnessError::Config("horizon_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Barrier learner on an unstable grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_holes: usize,
    /// Probability of the intended move (the rest spreads uniformly).
    pub p_intended: f64,
    /// Hole placement seed (layout is part of the experiment identity).
    pub layout_seed: u64,
    /// Optional map file overriding the generated layout.
    pub map_path: Option<PathBuf>,
    pub seeds: SeedSpec,
    /// Step cap = this multiple of the detection-time bound.
    pub max_steps_factor: f64,
    pub output_path: Option<PathBuf>,
}

impl GridConfig {
    /// Desk scale: 9x9, 4 holes.
    pub fn desk(base_seed: u64) -> Self {
        GridConfig {
            width: 9,
            height: 9,
            n_holes: 4,
            p_intended: 0.6,
            layout_seed: 1,
            map_path: None,
            seeds: SeedSpec::Derived { base_seed, n_runs: 1 },
            max_steps_factor: 20.0,
            output_path: None,
        }
    }

    /// Published scale: 15x15.
    pub fn paper(base_seed: u64) -> Self {
        let mut cfg = Self::desk(base_seed);
        cfg.width = 15;
        cfg.height = 15;
        cfg.n_holes = 8;
        cfg
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        self.seeds.check()?;
        if self.max_steps_factor.is_nan() || self.max_steps_factor <= 0.0 {
            return Err(HarnessError::Config("max_steps_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Assured-vs-classic comparison on the corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorConfig {
    pub length: usize,
    /// Agents per mode.
    pub n_agents: usize,
    pub eta: f64,
    pub gamma: f64,
    pub eps_explore: f64,
    /// Transitions per episode before the episode is cut.
    pub episode_cap: u64,
    /// Episodes per agent before the run is flagged incomplete.
    pub max_episodes: u64,
    pub base_seed: u64,
    pub output_path: Option<PathBuf>,
}

impl CorridorConfig {
    /// Desk scale: 200 agents on the length-15 corridor.
    pub fn desk(base_seed: u64) -> Self {
        CorridorConfig {
            length: 15,
            n_agents: 200,
            eta: 0.1,
            gamma: 0.9,
            eps_explore: 0.1,
            episode_cap: 2_000,
            max_episodes: 20_000,
            base_seed,
            output_path: None,
        }
    }

    /// Published scale: 1000 agents.
    pub fn paper(base_seed: u64) -> Self {
        let mut cfg = Self::desk(base_seed);
        cfg.n_agents = 1000;
        cfg
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.length < 2 {
            return Err(HarnessError::Config(format!("corridor length {} < 2", self.length)));
        }
        if self.n_agents == 0 {
            return Err(HarnessError::Config("n_agents must be positive".into()));
        }
        Ok(())
    }
}

/// Any experiment, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    BanditSweep(BanditSweepConfig),
    GridBarrier(GridConfig),
    CorridorCompare(CorridorConfig),
}
