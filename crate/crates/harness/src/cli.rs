//! Command-line front end.
//!
//! Subcommands: `bandit`, `grid`, `corridor` (the three experiment
//! drivers), `oracle` (exact unsafe set, lag and bounds for a model) and
//! `validate` (check an MDP file). A JSON config file overrides the
//! desk-scale defaults and explicit flags override the config. Exit codes:
//! 0 success, 1 configuration/usage error, 2 incomplete runs under
//! `--strict`.

use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use safe_explore_core::barrier::{bound_barrier_time, bstar_oracle, lag_partition};
use safe_explore_core::envs::{build_corridor, build_unstable_grid, GridSpec};
use safe_explore_core::mdp::TabularMdp;

use crate::bandit_sweep::run_bandit_sweep;
use crate::config::{
    BanditSweepConfig, CorridorConfig, ExperimentConfig, GridConfig, SeedSpec,
};
use crate::corridor_run::run_corridor_comparison;
use crate::grid_run::{build_grid, run_grid_experiment};
use crate::HarnessError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "safe-explore",
    about = "Safe-exploration experiments: unsafe-arm detection in bandits and barrier learning in MDPs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relaxed-inspector sweep over an (alpha, epsilon) grid
    Bandit(BanditArgs),
    /// Barrier learner detection runs on an unstable grid
    Grid(GridArgs),
    /// Assured vs. classic Q-learning on the narrow corridor
    Corridor(CorridorArgs),
    /// Exact unsafe set, lag partition and detection bound for a model
    Oracle(OracleArgs),
    /// Check an MDP file against the model invariants
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct BanditArgs {
    /// JSON config file (flags override its fields)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Arms per sampled instance
    #[arg(long)]
    arms: Option<usize>,
    /// Safety specification mu
    #[arg(long)]
    mu: Option<f64>,
    /// Lower end of the arm-parameter range
    #[arg(long)]
    arm_lo: Option<f64>,
    /// Upper end of the arm-parameter range
    #[arg(long)]
    arm_hi: Option<f64>,
    /// Comma-separated epsilon grid
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Comma-separated alpha grid
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Replications per grid point
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed for run derivation
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon as a multiple of the detection-time bound
    #[arg(long)]
    horizon_factor: Option<f64>,
    /// Fixed arm-parameter file (one value per line) instead of sampling
    #[arg(long)]
    arms_file: Option<PathBuf>,
    /// Use the published experiment sizes (1000 arms, 16 runs)
    #[arg(long)]
    paper_scale: bool,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 2 when any run is incomplete
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid width (generated layout)
    #[arg(long)]
    width: Option<usize>,
    /// Grid height (generated layout)
    #[arg(long)]
    height: Option<usize>,
    /// Number of holes (generated layout)
    #[arg(long)]
    holes: Option<usize>,
    /// Map file: '.' free, '#' wall, 'O' hole
    #[arg(long)]
    map: Option<PathBuf>,
    /// Probability of the intended move
    #[arg(long)]
    p: Option<f64>,
    /// Hole-placement seed
    #[arg(long)]
    layout_seed: Option<u64>,
    /// Learner replications
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Step cap as a multiple of the detection-time bound
    #[arg(long)]
    max_steps_factor: Option<f64>,
    /// Use the published experiment sizes (15x15 grid)
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct CorridorArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corridor length in cells
    #[arg(long)]
    length: Option<usize>,
    /// Agents per mode
    #[arg(long)]
    agents: Option<usize>,
    /// Learning rate
    #[arg(long)]
    eta: Option<f64>,
    /// Discount factor
    #[arg(long)]
    gamma: Option<f64>,
    /// Exploration probability
    #[arg(long)]
    eps: Option<f64>,
    /// Transitions per episode before the episode is cut
    #[arg(long)]
    episode_cap: Option<u64>,
    /// Episodes per agent before the run is flagged incomplete
    #[arg(long)]
    max_episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the published experiment sizes (1000 agents per mode)
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// MDP JSON file
    #[arg(long, conflicts_with_all = ["corridor_length", "grid_map", "width"])]
    mdp: Option<PathBuf>,
    /// Built-in corridor of this length
    #[arg(long)]
    corridor_length: Option<usize>,
    /// Built-in unstable grid from a map file
    #[arg(long)]
    grid_map: Option<PathBuf>,
    /// Built-in unstable grid: width (with --height, --holes)
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    holes: Option<usize>,
    #[arg(long)]
    layout_seed: Option<u64>,
    /// Probability of the intended move for built-in grids
    #[arg(long)]
    p: Option<f64>,
    /// Write the built model as MDP JSON
    #[arg(long)]
    dump_mdp: Option<PathBuf>,
    /// Write the per-pair unsafe table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// MDP JSON file
    #[arg(long)]
    mdp: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    let outcome = match cli.command {
        Command::Bandit(args) => cmd_bandit(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Corridor(args) => cmd_corridor(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn load_config<T>(path: &PathBuf, want: &str) -> Result<T, HarnessError>
where
    T: TryFrom<ExperimentConfig, Error = HarnessError>,
{
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    T::try_from(config).map_err(|_| {
        HarnessError::Config(format!("config file {} is not a {want} config", path.display()))
    })
}

impl TryFrom<ExperimentConfig> for BanditSweepConfig {
    type Error = HarnessError;
    fn try_from(c: ExperimentConfig) -> Result<Self, HarnessError> {
        match c {
            ExperimentConfig::BanditSweep(cfg) => Ok(cfg),
            _ => Err(HarnessError::Config("wrong experiment kind".into())),
        }
    }
}

impl TryFrom<ExperimentConfig> for GridConfig {
    type Error = HarnessError;
    fn try_from(c: ExperimentConfig) -> Result<Self, HarnessError> {
        match c {
            ExperimentConfig::GridBarrier(cfg) => Ok(cfg),
            _ => Err(HarnessError::Config("wrong experiment kind".into())),
        }
    }
}

impl TryFrom<ExperimentConfig> for CorridorConfig {
    type Error = HarnessError;
    fn try_from(c: ExperimentConfig) -> Result<Self, HarnessError> {
        match c {
            ExperimentConfig::CorridorCompare(cfg) => Ok(cfg),
            _ => Err(HarnessError::Config("wrong experiment kind".into())),
        }
    }
}

fn write_output(path: &PathBuf, csv: &str) -> Result<(), HarnessError> {
    fs::write(path, csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bandit(args: BanditArgs) -> Result<i32, HarnessError> {
    let seed = args.seed.unwrap_or(0);
    let mut cfg = if args.paper_scale {
        BanditSweepConfig::paper(seed)
    } else {
        BanditSweepConfig::desk(seed)
    };
    if let Some(path) = &args.config {
        cfg = load_config(path, "bandit_sweep")?;
    }
    if args.paper_scale && args.config.is_some() {
        let n_runs = 16;
        cfg.n_arms = 1000;
        cfg.seeds = SeedSpec::Derived { base_seed: seed, n_runs };
    }
    if let Some(v) = args.arms {
        cfg.n_arms = v;
    }
    if let Some(v) = args.mu {
        cfg.mu = v;
    }
    if let Some(v) = args.arm_lo {
        cfg.arm_lo = v;
    }
    if let Some(v) = args.arm_hi {
        cfg.arm_hi = v;
    }
    if let Some(v) = args.epsilons {
        cfg.epsilons = v;
    }
    if let Some(v) = args.alphas {
        cfg.alphas = v;
    }
    if args.runs.is_some() || args.seed.is_some() {
        let n_runs = args.runs.unwrap_or_else(|| cfg.seeds.seeds().len());
        cfg.seeds = SeedSpec::Derived { base_seed: seed, n_runs };
    }
    if let Some(v) = args.horizon_factor {
        cfg.horizon_factor = v;
    }
    if args.arms_file.is_some() {
        cfg.arm_file = args.arms_file;
    }
    if let Some(v) = args.out {
        cfg.output_path = Some(v);
    }

    let outcome = run_bandit_sweep(&cfg)?;
    let path = cfg.output_path.unwrap_or_else(|| PathBuf::from("bandit_sweep.csv"));
    write_output(&path, &outcome.csv)?;
    println!(
        "{} runs across {} grid points; {} incomplete",
        outcome.runs.len(),
        cfg.alphas.len() * cfg.epsilons.len(),
        outcome.n_incomplete
    );
    Ok(if args.strict && outcome.n_incomplete > 0 { EXIT_INCOMPLETE } else { EXIT_OK })
}

fn cmd_grid(args: GridArgs) -> Result<i32, HarnessError> {
    let seed = args.seed.unwrap_or(0);
    let mut cfg =
        if args.paper_scale { GridConfig::paper(seed) } else { GridConfig::desk(seed) };
    if let Some(path) = &args.config {
        cfg = load_config(path, "grid_barrier")?;
    }
    if args.paper_scale && args.config.is_some() {
        cfg.width = 15;
        cfg.height = 15;
        cfg.n_holes = 8;
    }
    if let Some(v) = args.width {
        cfg.width = v;
    }
    if let Some(v) = args.height {
        cfg.height = v;
    }
    if let Some(v) = args.holes {
        cfg.n_holes = v;
    }
    if args.map.is_some() {
        cfg.map_path = args.map;
    }
    if let Some(v) = args.p {
        cfg.p_intended = v;
    }
    if let Some(v) = args.layout_seed {
        cfg.layout_seed = v;
    }
    if args.runs.is_some() || args.seed.is_some() {
        let n_runs = args.runs.unwrap_or_else(|| cfg.seeds.seeds().len());
        cfg.seeds = SeedSpec::Derived { base_seed: seed, n_runs };
    }
    if let Some(v) = args.max_steps_factor {
        cfg.max_steps_factor = v;
    }
    if let Some(v) = args.out {
        cfg.output_path = Some(v);
    }

    let outcome = run_grid_experiment(&cfg)?;
    let path = cfg.output_path.unwrap_or_else(|| PathBuf::from("grid_barrier.csv"));
    write_output(&path, &outcome.csv)?;
    for s in &outcome.summaries {
        match s.completion_step {
            Some(step) => println!(
                "run {}: complete at step {step} (bound {:.0}, lag {}, mu {})",
                s.run, s.bound, s.lag, s.mu
            ),
            None => println!("run {}: incomplete", s.run),
        }
    }
    Ok(if args.strict && outcome.n_incomplete > 0 { EXIT_INCOMPLETE } else { EXIT_OK })
}

fn cmd_corridor(args: CorridorArgs) -> Result<i32, HarnessError> {
    let seed = args.seed.unwrap_or(0);
    let mut cfg = if args.paper_scale {
        CorridorConfig::paper(seed)
    } else {
        CorridorConfig::desk(seed)
    };
    if let Some(path) = &args.config {
        cfg = load_config(path, "corridor_compare")?;
    }
    if args.paper_scale && args.config.is_some() {
        cfg.n_agents = 1000;
    }
    if let Some(v) = args.length {
        cfg.length = v;
    }
    if let Some(v) = args.agents {
        cfg.n_agents = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.eps {
        cfg.eps_explore = v;
    }
    if let Some(v) = args.episode_cap {
        cfg.episode_cap = v;
    }
    if let Some(v) = args.max_episodes {
        cfg.max_episodes = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.out {
        cfg.output_path = Some(v);
    }

    let outcome = run_corridor_comparison(&cfg)?;
    let path = cfg.output_path.unwrap_or_else(|| PathBuf::from("corridor_compare.csv"));
    write_output(&path, &outcome.csv)?;
    for s in &outcome.summaries {
        println!(
            "{:>8} {:<20} mean {:.2} stderr {:.2} (n = {})",
            match s.mode {
                safe_explore_core::assured::AgentMode::Assured => "assured",
                safe_explore_core::assured::AgentMode::Classic => "classic",
            },
            s.metric,
            s.mean,
            s.stderr,
            s.n
        );
    }
    Ok(if args.strict && outcome.n_incomplete > 0 { EXIT_INCOMPLETE } else { EXIT_OK })
}

fn cmd_oracle(args: OracleArgs) -> Result<i32, HarnessError> {
    let p = args.p.unwrap_or(0.6);
    let mdp: TabularMdp = if let Some(path) = &args.mdp {
        TabularMdp::from_json_reader(fs::File::open(path)?)?
    } else if let Some(length) = args.corridor_length {
        build_corridor(length)?.mdp
    } else if let Some(path) = &args.grid_map {
        build_unstable_grid(&GridSpec::from_map_str(&fs::read_to_string(path)?, p)?)?.mdp
    } else if let (Some(width), Some(height)) = (args.width, args.height) {
        let cfg = GridConfig {
            width,
            height,
            n_holes: args.holes.unwrap_or(0),
            p_intended: p,
            layout_seed: args.layout_seed.unwrap_or(1),
            map_path: None,
            seeds: SeedSpec::List(vec![0]),
            max_steps_factor: 1.0,
            output_path: None,
        };
        build_grid(&cfg)?.mdp
    } else {
        return Err(HarnessError::Config(
            "give one of --mdp, --corridor-length, --grid-map or --width/--height".into(),
        ));
    };

    if let Some(path) = &args.dump_mdp {
        fs::write(path, mdp.to_json_string())?;
        println!("wrote {}", path.display());
    }

    let oracle = bstar_oracle(&mdp);
    let partition = lag_partition(&mdp);
    let bound = bound_barrier_time(&mdp);
    println!("states: {}  actions: {}", mdp.n_states(), mdp.n_actions());
    println!(
        "unsafe pairs: {} / {}  fully-unsafe states: {} / {}",
        oracle.n_condemned(),
        mdp.n_pairs(),
        oracle.n_condemned_states(),
        mdp.n_states()
    );
    println!(
        "lag: {}  min transition prob: {}  detection bound: {:.1}",
        partition.lag,
        mdp.min_nonzero_prob(),
        bound
    );

    if let Some(path) = &args.out {
        let mut csv = String::from("s,a,unsafe\n");
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                csv.push_str(&format!("{s},{a},{}\n", u8::from(oracle.is_condemned(s, a))));
            }
        }
        write_output(path, &csv)?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32, HarnessError> {
    let text = fs::read_to_string(&args.mdp)?;
    match TabularMdp::from_json_str(&text) {
        Ok(mdp) => {
            println!(
                "ok: {} states, {} actions, {} terminal",
                mdp.n_states(),
                mdp.n_actions(),
                mdp.terminal_states().len()
            );
            Ok(EXIT_OK)
        }
        Err(safe_explore_core::mdp::MdpError::Invalid(violations)) => {
            for v in &violations.0 {
                eprintln!("violation: {v}");
            }
            Ok(EXIT_CONFIG)
        }
        Err(e) => Err(e.into()),
    }
}
