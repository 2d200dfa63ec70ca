//! Reward learning on top of the barrier.
//!
//! The assured update pair is: fold the transition into the barrier, run a
//! standard Q-learning step, then add the barrier entry back into the Q
//! entry so condemned pairs are `-inf` in both tables. Behavior policies
//! mask condemned actions out of both the greedy and the exploratory draw.
//! The classic baseline is plain Q-learning where a damage transition pays
//! reward `-inf` (the extended-real value, not a finite penalty).

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::barrier::{barrier_update, BarrierTable};
use crate::mdp::TabularMdp;
use crate::xreal::XReal;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("state {state}: every action is condemned")]
    DeadState { state: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("policy must map each of {n_states} states to an action below {n_actions}")]
    BadPolicy { n_states: usize, n_actions: usize },
    #[error("{n_states} states exceed the direct-solve limit of {limit}")]
    TooLargeForDirectSolve { n_states: usize, limit: usize },
}

/// Action values over `(s, a)` pairs; finite reals or `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<XReal>,
    n_states: usize,
    n_actions: usize,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable { values: vec![XReal::ZERO; n_states * n_actions], n_states, n_actions }
    }

    pub fn get(&self, s: usize, a: usize) -> XReal {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: XReal) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn max_over_actions(&self, s: usize) -> XReal {
        (0..self.n_actions)
            .map(|a| self.get(s, a))
            .fold(XReal::NegInf, XReal::max)
    }
}

/// Learning-rate, discount and exploration knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    /// Constant learning rate in `(0, 1]` (episodic runs).
    pub eta: f64,
    /// Discount factor in `[0, 1)`.
    pub gamma: f64,
    /// Exploration probability in `[0, 1]`.
    pub eps_explore: f64,
    /// Maximum transitions per episode.
    pub episode_cap: u64,
}

impl LearnerParams {
    pub fn check(&self) -> Result<(), LearnerError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(LearnerError::InvalidParameter(format!("eta {} outside (0,1]", self.eta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnerError::InvalidParameter(format!(
                "gamma {} outside [0,1)",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_explore) {
            return Err(LearnerError::InvalidParameter(format!(
                "eps_explore {} outside [0,1]",
                self.eps_explore
            )));
        }
        if self.episode_cap == 0 {
            return Err(LearnerError::InvalidParameter("episode_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Assured Q-learning step: the usual `(1-eta) Q + eta (r + gamma max Q')`
/// in extended-real arithmetic, then the barrier entry is added back in.
/// The bootstrap term is zero when the successor is terminal.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    barrier: &BarrierTable,
    s: usize,
    a: usize,
    s_next: usize,
    reward: f64,
    next_terminal: bool,
    eta: f64,
    gamma: f64,
) {
    let boot = if next_terminal { XReal::ZERO } else { q.max_over_actions(s_next) };
    let target = XReal::finite(reward) + boot.scale(gamma);
    let mixed = q.get(s, a).scale(1.0 - eta) + target.scale(eta);
    q.set(s, a, barrier.get(s, a) + mixed);
}

/// Classic Q-learning step where damage pays `-inf` reward.
#[allow(clippy::too_many_arguments)]
fn classic_q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    s_next: usize,
    reward: f64,
    damage: bool,
    next_terminal: bool,
    eta: f64,
    gamma: f64,
) {
    let r = if damage { XReal::NegInf } else { XReal::finite(reward) };
    let boot = if next_terminal { XReal::ZERO } else { q.max_over_actions(s_next) };
    let target = r + boot.scale(gamma);
    let mixed = q.get(s, a).scale(1.0 - eta) + target.scale(eta);
    q.set(s, a, mixed);
}

/// Epsilon-greedy draw over the admissible set: all actions when `barrier`
/// is `None` (classic), otherwise only actions the barrier has not
/// condemned. Greedy ties are broken uniformly with the caller's rng so no
/// fixed action ordering biases exploration.
pub fn epsilon_greedy(
    q: &QTable,
    barrier: Option<&BarrierTable>,
    s: usize,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<usize, LearnerError> {
    let admissible: Vec<usize> = match barrier {
        Some(b) => (0..q.n_actions).filter(|&a| !b.is_condemned(s, a)).collect(),
        None => (0..q.n_actions).collect(),
    };
    if admissible.is_empty() {
        return Err(LearnerError::DeadState { state: s });
    }
    if rng.random::<f64>() < eps {
        return Ok(admissible[rng.random_range(0..admissible.len())]);
    }
    let best = admissible
        .iter()
        .map(|&a| q.get(s, a))
        .fold(XReal::NegInf, XReal::max);
    let ties: Vec<usize> =
        admissible.into_iter().filter(|&a| q.get(s, a) == best).collect();
    if ties.len() == 1 {
        Ok(ties[0])
    } else {
        Ok(ties[rng.random_range(0..ties.len())])
    }
}

/// One sampled transition in a generative run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssuredTraceStep {
    pub step: u64,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub reward: f64,
    pub damage: bool,
}

/// Outcome of a generative assured run.
#[derive(Debug, Clone)]
pub struct AssuredRunResult {
    pub q: QTable,
    pub barrier: BarrierTable,
    /// Step at which the barrier matched the exact unsafe set, if it did.
    pub barrier_completion_step: Option<u64>,
    pub steps: u64,
    /// Populated only when trace recording was requested.
    pub trace: Vec<AssuredTraceStep>,
}

/// Exponent of the per-pair diminishing step-size schedule
/// `eta = 1 / (1 + visits)^0.7`. Any exponent in (1/2, 1] keeps the sums
/// divergent and square-summable; 0.7 converges at a usable rate where the
/// harmonic schedule stalls at `n^-(1-gamma)` on stochastic kernels.
const STEP_SIZE_EXPONENT: f64 = 0.7;

/// Generative assured Q-learning: draw a not-condemned pair uniformly,
/// sample one transition, fold it into the barrier and then into Q. Uses
/// the per-pair diminishing schedule `eta = 1 / (1 + visits)^0.7`.
pub fn generative_assured_q(
    mdp: &TabularMdp,
    gamma: f64,
    rng: &mut impl Rng,
    max_steps: u64,
    record_trace: bool,
) -> Result<AssuredRunResult, LearnerError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(LearnerError::InvalidParameter(format!("gamma {gamma} outside [0,1)")));
    }
    let target = crate::barrier::bstar_oracle(mdp);
    let target_condemned = target.n_condemned();

    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut barrier = BarrierTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut visits = vec![0u64; mdp.n_pairs()];
    let mut candidates: Vec<(usize, usize)> = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .collect();
    let mut trace = Vec::new();
    let mut n_condemned = 0;
    let mut barrier_completion_step = if target_condemned == 0 { Some(0) } else { None };

    let mut step = 0u64;
    while step < max_steps && !candidates.is_empty() {
        step += 1;
        let pick = rng.random_range(0..candidates.len());
        let (s, a) = candidates[pick];
        let (s_next, reward, damage) = mdp.step(s, a, rng).expect("candidate pair in range");
        let newly = barrier_update(&mut barrier, s, a, s_next, damage);
        let pair = s * mdp.n_actions() + a;
        let eta = 1.0 / (1.0 + visits[pair] as f64).powf(STEP_SIZE_EXPONENT);
        visits[pair] += 1;
        q_update(&mut q, &barrier, s, a, s_next, reward, mdp.is_terminal(s_next), eta, gamma);
        debug_assert_eq!(q.get(s, a).is_neg_inf(), barrier.is_condemned(s, a));
        if newly {
            n_condemned += 1;
            candidates.remove(pick);
            if n_condemned == target_condemned {
                barrier_completion_step = Some(step);
            }
        }
        if record_trace {
            trace.push(AssuredTraceStep { step, s, a, s_next, reward, damage });
        }
    }

    Ok(AssuredRunResult { q, barrier, barrier_completion_step, steps: step, trace })
}

/// Which episodic agent to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentMode {
    /// Barrier-masked Q-learning.
    Assured,
    /// Plain Q-learning with `-inf` reward on damage.
    Classic,
}

/// Caps and recording switches for an episodic run.
#[derive(Debug, Clone, Copy)]
pub struct EpisodicOptions {
    pub max_episodes: u64,
    /// Stop training the moment the goal is first reached.
    pub stop_after_first_goal: bool,
    /// Keep the full transition log (for replay checks).
    pub record_transitions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: u64,
    pub steps: u64,
    pub bumps: u64,
    pub reached_goal: bool,
    pub cumulative_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub episode: u64,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub damage: bool,
}

/// Per-episode log of an episodic training run.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episodes: Vec<EpisodeStats>,
    pub transitions_to_first_goal: Option<u64>,
    pub episodes_to_first_goal: Option<u64>,
    pub bumps_to_first_goal: Option<u64>,
    /// False iff the caps ran out before the goal was ever reached.
    pub complete: bool,
    pub transitions: Vec<TransitionRecord>,
    pub q: QTable,
    pub barrier: Option<BarrierTable>,
}

impl EpisodeLog {
    /// Episode CSV: `episode,steps,bumps,reached_goal,cumulative_steps`.
    pub fn write_episodes_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "episode,steps,bumps,reached_goal,cumulative_steps")?;
        for e in &self.episodes {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.episode,
                e.steps,
                e.bumps,
                u8::from(e.reached_goal),
                e.cumulative_steps
            )?;
        }
        Ok(())
    }
}

/// Trains one agent episodically from `start`, ending episodes on any
/// terminal state (damage routes to a terminal sink in the supported
/// environments) or on the per-episode cap. `goal` is the terminal state
/// that counts as success.
#[allow(clippy::too_many_arguments)]
pub fn run_episodic(
    mdp: &TabularMdp,
    mode: AgentMode,
    params: &LearnerParams,
    rng: &mut impl Rng,
    start: usize,
    goal: usize,
    options: &EpisodicOptions,
) -> Result<EpisodeLog, LearnerError> {
    params.check()?;
    if start >= mdp.n_states() || goal >= mdp.n_states() {
        return Err(LearnerError::InvalidParameter("start or goal out of range".into()));
    }
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut barrier = match mode {
        AgentMode::Assured => Some(BarrierTable::zeros(mdp.n_states(), mdp.n_actions())),
        AgentMode::Classic => None,
    };
    let mut episodes = Vec::new();
    let mut transitions = Vec::new();
    let mut cumulative_steps = 0u64;
    let mut total_bumps = 0u64;
    let mut first_goal: Option<(u64, u64, u64)> = None; // (steps, episodes, bumps)

    'training: for episode in 1..=options.max_episodes {
        let mut s = start;
        let mut steps = 0u64;
        let mut bumps = 0u64;
        let mut reached_goal = false;
        while !mdp.is_terminal(s) && steps < params.episode_cap {
            let a = epsilon_greedy(&q, barrier.as_ref(), s, params.eps_explore, rng)?;
            let (s_next, reward, damage) = mdp.step(s, a, rng).expect("indices in range");
            match &mut barrier {
                Some(b) => {
                    barrier_update(b, s, a, s_next, damage);
                    q_update(
                        &mut q,
                        b,
                        s,
                        a,
                        s_next,
                        reward,
                        mdp.is_terminal(s_next),
                        params.eta,
                        params.gamma,
                    );
                }
                None => classic_q_update(
                    &mut q,
                    s,
                    a,
                    s_next,
                    reward,
                    damage,
                    mdp.is_terminal(s_next),
                    params.eta,
                    params.gamma,
                ),
            }
            if options.record_transitions {
                transitions.push(TransitionRecord { episode, s, a, s_next, damage });
            }
            steps += 1;
            cumulative_steps += 1;
            if damage {
                bumps += 1;
                total_bumps += 1;
            }
            s = s_next;
            if s == goal {
                reached_goal = true;
            }
        }
        episodes.push(EpisodeStats { episode, steps, bumps, reached_goal, cumulative_steps });
        if reached_goal && first_goal.is_none() {
            first_goal = Some((cumulative_steps, episode, total_bumps));
            if options.stop_after_first_goal {
                break 'training;
            }
        }
    }

    Ok(EpisodeLog {
        episodes,
        transitions_to_first_goal: first_goal.map(|(t, _, _)| t),
        episodes_to_first_goal: first_goal.map(|(_, e, _)| e),
        bumps_to_first_goal: first_goal.map(|(_, _, b)| b),
        complete: first_goal.is_some(),
        transitions,
        q,
        barrier,
    })
}

const DIRECT_SOLVE_LIMIT: usize = 1000;

/// Evaluates a deterministic policy as (reward-only part, barrier part).
///
/// The barrier part is the policy-restricted closure: a pair is condemned
/// iff it can damage immediately or can reach, following the policy, a
/// state whose policy action is condemned. The reward-only part solves the
/// policy's linear system directly, ignoring damage. The decomposed action
/// value is the extended-real sum of the two.
pub fn policy_eval_decomposed(
    mdp: &TabularMdp,
    policy: &[usize],
    gamma: f64,
) -> Result<(Vec<f64>, BarrierTable), LearnerError> {
    let n = mdp.n_states();
    if n > DIRECT_SOLVE_LIMIT {
        return Err(LearnerError::TooLargeForDirectSolve { n_states: n, limit: DIRECT_SOLVE_LIMIT });
    }
    if policy.len() != n || policy.iter().any(|&a| a >= mdp.n_actions()) {
        return Err(LearnerError::BadPolicy { n_states: n, n_actions: mdp.n_actions() });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(LearnerError::InvalidParameter(format!("gamma {gamma} outside [0,1)")));
    }

    // Barrier part: closure under the fixed policy.
    let mut barrier = BarrierTable::zeros(n, mdp.n_actions());
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            if mdp.branches(s, a).iter().any(|b| b.is_damage()) {
                barrier.condemn(s, a);
            }
        }
    }
    loop {
        let mut changed = false;
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                if barrier.is_condemned(s, a) {
                    continue;
                }
                let doomed = mdp
                    .branches(s, a)
                    .iter()
                    .any(|b| barrier.is_condemned(b.next_state, policy[b.next_state]));
                if doomed {
                    barrier.condemn(s, a);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Reward-only state values: solve (I - gamma P_pi) V = R_pi.
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        matrix[s * n + s] = 1.0;
        for b in mdp.branches(s, policy[s]) {
            matrix[s * n + b.next_state] -= gamma * b.prob;
            rhs[s] += b.prob * b.reward;
        }
    }
    let values = solve_dense(&mut matrix, &mut rhs, n)?;

    // Lift to action values.
    let mut finite_part = vec![0.0; mdp.n_pairs()];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            finite_part[s * mdp.n_actions() + a] = mdp
                .branches(s, a)
                .iter()
                .map(|b| b.prob * (b.reward + gamma * values[b.next_state]))
                .sum();
        }
    }
    Ok((finite_part, barrier))
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_dense(matrix: &mut [f64], rhs: &mut [f64], n: usize) -> Result<Vec<f64>, LearnerError> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| matrix[a * n + col].abs().total_cmp(&matrix[b * n + col].abs()))
            .unwrap();
        if matrix[pivot_row * n + col].abs() < 1e-12 {
            return Err(LearnerError::InvalidParameter("singular policy system".into()));
        }
        if pivot_row != col {
            for j in 0..n {
                matrix.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let factor = matrix[row * n + col] / matrix[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                matrix[row * n + j] -= factor * matrix[col * n + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..n {
            acc -= matrix[row * n + j] * x[j];
        }
        x[row] = acc / matrix[row * n + row];
    }
    Ok(x)
}
