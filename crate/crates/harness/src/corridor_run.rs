//! Assured vs. classic Q-learning on the narrow corridor.
//!
//! Trains `n_agents` independent agents per mode, each on its own seed
//! stream, and reports transitions and bumps until the goal is first
//! reached. Agent seeds derive from `(base_seed, mode, agent)`, so the two
//! cohorts are independent and individually extensible.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_explore_core::assured::{run_episodic, AgentMode, EpisodicOptions, LearnerParams};
use safe_explore_core::envs::build_corridor;

use crate::config::CorridorConfig;
use crate::runner::parallel_indexed;
use crate::seeding::run_seed_in;
use crate::stats::{aggregate, sample_variance};
use crate::HarnessError;

/// One trained agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorRunRow {
    pub mode: AgentMode,
    pub agent: usize,
    pub seed: u64,
    pub transitions_to_goal: Option<u64>,
    pub bumps_to_goal: Option<u64>,
    pub episodes_to_goal: Option<u64>,
    pub complete: bool,
}

/// Mean, spread and variance of one metric for one cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorSummaryRow {
    pub mode: AgentMode,
    /// `transitions_to_goal` or `bumps_to_goal`.
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub n: usize,
    pub n_incomplete: usize,
}

#[derive(Debug, Clone)]
pub struct CorridorOutcome {
    pub runs: Vec<CorridorRunRow>,
    pub summaries: Vec<CorridorSummaryRow>,
    pub n_incomplete: usize,
    pub csv: String,
}

fn mode_name(mode: AgentMode) -> &'static str {
    match mode {
        AgentMode::Assured => "assured",
        AgentMode::Classic => "classic",
    }
}

/// Trains both cohorts and renders the combined CSV.
pub fn run_corridor_comparison(config: &CorridorConfig) -> Result<CorridorOutcome, HarnessError> {
    config.check()?;
    let corridor = build_corridor(config.length)?;
    let params = LearnerParams {
        eta: config.eta,
        gamma: config.gamma,
        eps_explore: config.eps_explore,
        episode_cap: config.episode_cap,
    };
    params.check()?;
    let options = EpisodicOptions {
        max_episodes: config.max_episodes,
        stop_after_first_goal: true,
        record_transitions: false,
    };

    let modes = [AgentMode::Assured, AgentMode::Classic];
    let jobs: Vec<(usize, usize)> = (0..modes.len())
        .flat_map(|m| (0..config.n_agents).map(move |a| (m, a)))
        .collect();
    let rows: Vec<Result<CorridorRunRow, HarnessError>> = parallel_indexed(jobs.len(), |j| {
        let (m, agent) = jobs[j];
        let mode = modes[m];
        let seed = run_seed_in(config.base_seed, m as u64, agent as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = run_episodic(
            &corridor.mdp,
            mode,
            &params,
            &mut rng,
            corridor.start,
            corridor.goal_sink,
            &options,
        )?;
        Ok(CorridorRunRow {
            mode,
            agent,
            seed,
            transitions_to_goal: log.transitions_to_first_goal,
            bumps_to_goal: log.bumps_to_first_goal,
            episodes_to_goal: log.episodes_to_first_goal,
            complete: log.complete,
        })
    });
    let runs: Vec<CorridorRunRow> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut summaries = Vec::new();
    for mode in modes {
        let cohort: Vec<&CorridorRunRow> = runs.iter().filter(|r| r.mode == mode).collect();
        let n_incomplete = cohort.iter().filter(|r| !r.complete).count();
        let transitions: Vec<f64> = cohort
            .iter()
            .filter_map(|r| r.transitions_to_goal)
            .map(|v| v as f64)
            .collect();
        let bumps: Vec<f64> =
            cohort.iter().filter_map(|r| r.bumps_to_goal).map(|v| v as f64).collect();
        for (metric, values) in
            [("transitions_to_goal", &transitions), ("bumps_to_goal", &bumps)]
        {
            if values.is_empty() {
                continue;
            }
            let s = aggregate(values);
            summaries.push(CorridorSummaryRow {
                mode,
                metric,
                mean: s.mean,
                stderr: s.stderr,
                variance: sample_variance(values),
                n: s.n,
                n_incomplete,
            });
        }
    }

    let n_incomplete = runs.iter().filter(|r| !r.complete).count();
    let csv = render_csv(&runs, &summaries);
    Ok(CorridorOutcome { runs, summaries, n_incomplete, csv })
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(runs: &[CorridorRunRow], summaries: &[CorridorSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "kind,mode,agent,seed,transitions_to_goal,bumps_to_goal,episodes_to_goal,complete,metric,mean,stderr,variance,n,n_incomplete\n",
    );
    for r in runs {
        let _ = writeln!(
            out,
            "run,{},{},{},{},{},{},{},,,,,,",
            mode_name(r.mode),
            r.agent,
            r.seed,
            fmt_opt(r.transitions_to_goal),
            fmt_opt(r.bumps_to_goal),
            fmt_opt(r.episodes_to_goal),
            u8::from(r.complete),
        );
    }
    for s in summaries {
        let _ = writeln!(
            out,
            "summary,{},,,,,,,{},{},{},{},{},{}",
            mode_name(s.mode),
            s.metric,
            s.mean,
            s.stderr,
            s.variance,
            s.n,
            s.n_incomplete,
        );
    }
    out
}
