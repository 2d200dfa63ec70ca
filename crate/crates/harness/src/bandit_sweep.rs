//! Relaxed-inspector sweep over an `(alpha, epsilon)` grid.
//!
//! Each replication index owns one rng stream seeded independently of the
//! grid point, so every grid point sees the same freshly sampled arm sets
//! (common random numbers across the sweep). Incomplete runs (horizon
//! exhausted) are kept as raw rows but excluded from the means.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_explore_core::bandit::{
    bounds, run_inspector, BanditInstance, InspectorMode,
};

use crate::config::BanditSweepConfig;
use crate::runner::parallel_indexed;
use crate::stats::aggregate;
use crate::HarnessError;

/// One replication at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRunRow {
    pub alpha: f64,
    pub epsilon: f64,
    pub run: usize,
    pub seed: u64,
    pub n_unsafe: usize,
    /// `None` when no arm is `(mu - epsilon)`-safe.
    pub conservation: Option<f64>,
    pub exposure: u64,
    pub exposure_norm: f64,
    /// Per-instance expected-exposure bound `M * (1 + ln(1/alpha)/kl)`.
    pub exposure_bound: f64,
    pub complete: bool,
}

/// Mean and spread of one metric at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditSummaryRow {
    pub alpha: f64,
    pub epsilon: f64,
    /// `C_eps_inf` or `E_inf_over_K`.
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub n_incomplete: usize,
}

#[derive(Debug, Clone)]
pub struct BanditSweepOutcome {
    pub runs: Vec<BanditRunRow>,
    pub summaries: Vec<BanditSummaryRow>,
    pub n_incomplete: usize,
    pub csv: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs the sweep and renders the combined raw + summary CSV.
pub fn run_bandit_sweep(config: &BanditSweepConfig) -> Result<BanditSweepOutcome, HarnessError> {
    config.check()?;
    let seeds = config.seeds.seeds();
    let fixed_instance = match &config.arm_file {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            Some(BanditInstance::from_reader(std::io::BufReader::new(file), config.mu)?)
        }
        None => None,
    };

    let mut grid: Vec<(f64, f64)> = Vec::new();
    for &alpha in &config.alphas {
        for &epsilon in &config.epsilons {
            grid.push((alpha, epsilon));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..seeds.len()).map(move |r| (g, r)))
        .collect();

    let rows: Vec<Result<BanditRunRow, HarnessError>> = parallel_indexed(jobs.len(), |j| {
        let (g, r) = jobs[j];
        let (alpha, epsilon) = grid[g];
        let seed = seeds[r];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instance = match &fixed_instance {
            Some(instance) => instance.clone(),
            None => BanditInstance::generate(
                config.n_arms,
                config.arm_lo,
                config.arm_hi,
                config.mu,
                &mut rng,
            )?,
        };
        let mode = InspectorMode::Relaxed { epsilon, alpha };
        // At the limit slack epsilon = mu the test fires at the first
        // damage, so the flawless bounds govern the horizon.
        let (time_bound, exposure_bound) = if epsilon < config.mu {
            let relaxed = bounds(&instance, &mode)?.relaxed.expect("relaxed mode");
            (relaxed.time, relaxed.exposure)
        } else {
            let flawless = bounds(&instance, &InspectorMode::Flawless)?.flawless;
            (flawless.time, flawless.exposure)
        };
        let horizon = (config.horizon_factor * time_bound).ceil().max(1.0) as u64;
        let record = run_inspector(&instance, mode, &mut rng, horizon)?;
        Ok(BanditRunRow {
            alpha,
            epsilon,
            run: r,
            seed,
            n_unsafe: instance.n_unsafe(),
            conservation: record.final_conservation,
            exposure: record.final_exposure,
            exposure_norm: record.final_exposure as f64 / instance.n_arms() as f64,
            exposure_bound,
            complete: record.complete,
        })
    });
    let runs: Vec<BanditRunRow> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut summaries = Vec::new();
    for &(alpha, epsilon) in &grid {
        let point: Vec<&BanditRunRow> = runs
            .iter()
            .filter(|row| row.alpha == alpha && row.epsilon == epsilon)
            .collect();
        let complete: Vec<&&BanditRunRow> = point.iter().filter(|r| r.complete).collect();
        let n_incomplete = point.len() - complete.len();
        let conservations: Vec<f64> =
            complete.iter().filter_map(|r| r.conservation).collect();
        if !conservations.is_empty() {
            let s = aggregate(&conservations);
            summaries.push(BanditSummaryRow {
                alpha,
                epsilon,
                metric: "C_eps_inf",
                mean: s.mean,
                stderr: s.stderr,
                n: s.n,
                n_incomplete,
            });
        }
        let exposures: Vec<f64> = complete.iter().map(|r| r.exposure_norm).collect();
        if !exposures.is_empty() {
            let s = aggregate(&exposures);
            summaries.push(BanditSummaryRow {
                alpha,
                epsilon,
                metric: "E_inf_over_K",
                mean: s.mean,
                stderr: s.stderr,
                n: s.n,
                n_incomplete,
            });
        }
    }

    let n_incomplete = runs.iter().filter(|r| !r.complete).count();
    let csv = render_csv(&runs, &summaries);
    Ok(BanditSweepOutcome { runs, summaries, n_incomplete, csv })
}

fn render_csv(runs: &[BanditRunRow], summaries: &[BanditSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "kind,alpha,epsilon,run,seed,n_unsafe,conservation,exposure,exposure_norm,exposure_bound,complete,metric,mean,stderr,n,n_incomplete\n",
    );
    for r in runs {
        let _ = writeln!(
            out,
            "run,{},{},{},{},{},{},{},{},{},{},,,,,",
            r.alpha,
            r.epsilon,
            r.run,
            r.seed,
            r.n_unsafe,
            fmt_opt(r.conservation),
            r.exposure,
            r.exposure_norm,
            r.exposure_bound,
            u8::from(r.complete),
        );
    }
    for s in summaries {
        let _ = writeln!(
            out,
            "summary,{},{},,,,,,,,,{},{},{},{},{}",
            s.alpha, s.epsilon, s.metric, s.mean, s.stderr, s.n, s.n_incomplete,
        );
    }
    out
}
