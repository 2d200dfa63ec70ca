//! Barrier learner on the unstable grid: detection time series and the
//! closed-form bound.

use std::fmt::Write as _;
use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_explore_core::barrier::{bound_barrier_time, bstar_oracle, lag_partition};
use safe_explore_core::envs::{build_unstable_grid, BuiltGrid, GridSpec};

use crate::config::GridConfig;
use crate::runner::parallel_indexed;
use crate::HarnessError;

/// One point of the detection time series (emitted when the condemned count
/// changes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSeriesRow {
    pub run: usize,
    pub seed: u64,
    pub step: u64,
    /// Condemned pairs over the exact unsafe pair count.
    pub frac_pairs: f64,
    /// Fully condemned states over the exact fully-unsafe state count.
    pub frac_states: f64,
}

/// Per-run completion summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSummaryRow {
    pub run: usize,
    pub seed: u64,
    pub completion_step: Option<u64>,
    pub bound: f64,
    pub lag: usize,
    pub mu: f64,
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub series: Vec<GridSeriesRow>,
    pub summaries: Vec<GridSummaryRow>,
    pub n_incomplete: usize,
    pub csv: String,
}

/// Builds the configured grid (map file wins over the generated layout).
pub fn build_grid(config: &GridConfig) -> Result<BuiltGrid, HarnessError> {
    let spec = match &config.map_path {
        Some(path) => GridSpec::from_map_str(&fs::read_to_string(path)?, config.p_intended)?,
        None => GridSpec::random_holes(
            config.width,
            config.height,
            config.n_holes,
            config.p_intended,
            config.layout_seed,
        )?,
    };
    Ok(build_unstable_grid(&spec)?)
}

/// Runs the barrier learner once per seed on the configured grid.
pub fn run_grid_experiment(config: &GridConfig) -> Result<GridOutcome, HarnessError> {
    config.check()?;
    let built = build_grid(config)?;
    let mdp = built.mdp;
    let bound = bound_barrier_time(&mdp);
    let lag = lag_partition(&mdp).lag;
    let mu = mdp.min_nonzero_prob();
    let oracle = bstar_oracle(&mdp);
    let unsafe_pairs = oracle.n_condemned();
    let unsafe_states = oracle.n_condemned_states();
    let max_steps = (config.max_steps_factor * bound).ceil().max(1.0) as u64;
    let seeds = config.seeds.seeds();

    type RunOut = (Vec<GridSeriesRow>, GridSummaryRow);
    let per_run: Vec<Result<RunOut, HarnessError>> = parallel_indexed(seeds.len(), |run| {
        let seed = seeds[run];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let result = safe_explore_core::barrier::barrier_learner(&mdp, &mut rng, max_steps)?;
        let mut series = vec![GridSeriesRow { run, seed, step: 0, frac_pairs: 0.0, frac_states: 0.0 }];
        for t in result.trace.iter().filter(|t| t.newly_condemned) {
            let states_done = count_dead_states(&result.detection_steps, &mdp, t.step);
            series.push(GridSeriesRow {
                run,
                seed,
                step: t.step,
                frac_pairs: if unsafe_pairs == 0 {
                    0.0
                } else {
                    t.n_condemned as f64 / unsafe_pairs as f64
                },
                frac_states: if unsafe_states == 0 {
                    0.0
                } else {
                    states_done as f64 / unsafe_states as f64
                },
            });
        }
        let summary = GridSummaryRow {
            run,
            seed,
            completion_step: result.completion_step,
            bound,
            lag,
            mu,
            complete: result.complete,
        };
        Ok((series, summary))
    });

    let mut series = Vec::new();
    let mut summaries = Vec::new();
    for item in per_run {
        let (s, summary) = item?;
        series.extend(s);
        summaries.push(summary);
    }
    let n_incomplete = summaries.iter().filter(|s| !s.complete).count();
    let csv = render_csv(&series, &summaries);
    Ok(GridOutcome { series, summaries, n_incomplete, csv })
}

/// States whose every action was condemned by `step`.
fn count_dead_states(
    detection_steps: &[Option<u64>],
    mdp: &safe_explore_core::mdp::TabularMdp,
    step: u64,
) -> usize {
    (0..mdp.n_states())
        .filter(|&s| {
            (0..mdp.n_actions()).all(|a| {
                detection_steps[s * mdp.n_actions() + a].is_some_and(|d| d <= step)
            })
        })
        .count()
}

fn render_csv(series: &[GridSeriesRow], summaries: &[GridSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str("kind,run,seed,step,frac_pairs,frac_states,completion_step,bound,lag,mu,complete\n");
    for r in series {
        let _ = writeln!(
            out,
            "series,{},{},{},{},{},,,,,",
            r.run, r.seed, r.step, r.frac_pairs, r.frac_states,
        );
    }
    for s in summaries {
        let completion = s.completion_step.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "summary,{},{},,,,{},{},{},{},{}",
            s.run,
            s.seed,
            completion,
            s.bound,
            s.lag,
            s.mu,
            u8::from(s.complete),
        );
    }
    out
}
