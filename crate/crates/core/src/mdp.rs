//! Finite MDPs with a damage-augmented kernel `p(s', r, d | s, a)`.
//!
//! Each state-action pair stores an explicit list of branches; zero-mass
//! branches are unrepresentable, so the minimum branch probability of a valid
//! model is strictly positive. Damage and episode termination are decoupled:
//! environments that end episodes on damage route damage branches to an
//! absorbing terminal state.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for per-pair probability mass at validation time.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// One possible outcome of taking an action: successor state, probability,
/// reward and damage bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(rename = "sp")]
    pub next_state: usize,
    #[serde(rename = "p")]
    pub prob: f64,
    #[serde(rename = "r")]
    pub reward: f64,
    #[serde(rename = "d")]
    pub damage: u8,
}

impl Branch {
    pub fn is_damage(&self) -> bool {
        self.damage == 1
    }
}

/// A finite MDP with explicit transition branches per `(s, a)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Indexed by `s * n_actions + a`.
    transitions: Vec<Vec<Branch>>,
    terminal_states: BTreeSet<usize>,
}

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("state {state} out of range (n_states = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("action {action} out of range (n_actions = {n_actions})")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("model failed validation: {0}")]
    Invalid(ViolationList),
    #[error("malformed MDP file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A single invariant violation, located at its `(s, a)` pair where relevant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbMass { s: usize, a: usize, sum: f64 },
    NonPositiveProb { s: usize, a: usize, prob: f64 },
    BadDamage { s: usize, a: usize, damage: u8 },
    NonFiniteReward { s: usize, a: usize, reward: f64 },
    BadNextState { s: usize, a: usize, next_state: usize },
    NoBranches { s: usize, a: usize },
    TerminalOutOfRange { state: usize },
    TerminalNotAbsorbing { s: usize, a: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ProbMass { s, a, sum } => {
                write!(f, "({s},{a}): branch probabilities sum to {sum}, expected 1")
            }
            Violation::NonPositiveProb { s, a, prob } => {
                write!(f, "({s},{a}): branch probability {prob} is not > 0")
            }
            Violation::BadDamage { s, a, damage } => {
                write!(f, "({s},{a}): damage value {damage} is not in {{0,1}}")
            }
            Violation::NonFiniteReward { s, a, reward } => {
                write!(f, "({s},{a}): reward {reward} is not finite")
            }
            Violation::BadNextState { s, a, next_state } => {
                write!(f, "({s},{a}): next state {next_state} out of range")
            }
            Violation::NoBranches { s, a } => write!(f, "({s},{a}): no branches"),
            Violation::TerminalOutOfRange { state } => {
                write!(f, "terminal state {state} out of range")
            }
            Violation::TerminalNotAbsorbing { s, a } => {
                write!(f, "terminal state {s} action {a}: not a zero-reward, zero-damage self-loop")
            }
        }
    }
}

/// Wrapper so a violation list can ride inside an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationList(pub Vec<Violation>);

impl fmt::Display for ViolationList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// On-disk JSON shape: `{n_states, n_actions, terminal, transitions}`.
#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    terminal: Vec<usize>,
    transitions: Vec<TransitionRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionRow {
    s: usize,
    a: usize,
    branches: Vec<Branch>,
}

impl TabularMdp {
    /// Assembles a model from parts without validating. Branch lists are
    /// indexed `s * n_actions + a`; the caller is expected to run
    /// [`TabularMdp::validate`] (builders in [`crate::envs`] always produce
    /// valid output).
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<Branch>>,
        terminal_states: BTreeSet<usize>,
    ) -> Self {
        assert_eq!(transitions.len(), n_states * n_actions, "one branch list per (s,a)");
        TabularMdp { n_states, n_actions, transitions, terminal_states }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        debug_assert!(s < self.n_states && a < self.n_actions);
        s * self.n_actions + a
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal_states.contains(&s)
    }

    pub fn terminal_states(&self) -> &BTreeSet<usize> {
        &self.terminal_states
    }

    pub fn branches(&self, s: usize, a: usize) -> &[Branch] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Samples one transition from `(s, a)`, consuming exactly one rng draw.
    pub fn step(&self, s: usize, a: usize, rng: &mut impl Rng) -> Result<(usize, f64, bool), MdpError> {
        if s >= self.n_states {
            return Err(MdpError::StateOutOfRange { state: s, n_states: self.n_states });
        }
        if a >= self.n_actions {
            return Err(MdpError::ActionOutOfRange { action: a, n_actions: self.n_actions });
        }
        let branches = self.branches(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for b in branches {
            acc += b.prob;
            if u < acc {
                return Ok((b.next_state, b.reward, b.is_damage()));
            }
        }
        // Mass can fall a few ulps short of 1; attribute the sliver to the last branch.
        let last = branches.last().expect("validated models have branches");
        Ok((last.next_state, last.reward, last.is_damage()))
    }

    /// The smallest branch probability anywhere in the model. Zero-mass
    /// branches cannot be represented, so on a valid model this is the lower
    /// bound on nonzero transition probabilities.
    pub fn min_nonzero_prob(&self) -> f64 {
        self.transitions
            .iter()
            .flat_map(|bs| bs.iter().map(|b| b.prob))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every invariant and returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let branches = self.branches(s, a);
                if branches.is_empty() {
                    out.push(Violation::NoBranches { s, a });
                    continue;
                }
                let mut sum = 0.0;
                for b in branches {
                    sum += b.prob;
                    if b.prob.is_nan() || b.prob <= 0.0 {
                        out.push(Violation::NonPositiveProb { s, a, prob: b.prob });
                    }
                    if b.damage > 1 {
                        out.push(Violation::BadDamage { s, a, damage: b.damage });
                    }
                    if !b.reward.is_finite() {
                        out.push(Violation::NonFiniteReward { s, a, reward: b.reward });
                    }
                    if b.next_state >= self.n_states {
                        out.push(Violation::BadNextState { s, a, next_state: b.next_state });
                    }
                }
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    out.push(Violation::ProbMass { s, a, sum });
                }
            }
        }
        for &t in &self.terminal_states {
            if t >= self.n_states {
                out.push(Violation::TerminalOutOfRange { state: t });
                continue;
            }
            for a in 0..self.n_actions {
                let absorbing = self.branches(t, a).iter().all(|b| {
                    b.next_state == t && b.reward == 0.0 && b.damage == 0
                });
                if !absorbing {
                    out.push(Violation::TerminalNotAbsorbing { s: t, a });
                }
            }
        }
        out
    }

    /// Parses the JSON wire format and rejects invalid models.
    pub fn from_json_reader(reader: impl Read) -> Result<Self, MdpError> {
        let file: MdpFile = serde_json::from_reader(reader)?;
        let mut transitions = vec![Vec::new(); file.n_states * file.n_actions];
        for row in file.transitions {
            if row.s >= file.n_states {
                return Err(MdpError::StateOutOfRange { state: row.s, n_states: file.n_states });
            }
            if row.a >= file.n_actions {
                return Err(MdpError::ActionOutOfRange { action: row.a, n_actions: file.n_actions });
            }
            transitions[row.s * file.n_actions + row.a] = row.branches;
        }
        let mdp = TabularMdp::from_parts(
            file.n_states,
            file.n_actions,
            transitions,
            file.terminal.into_iter().collect(),
        );
        let violations = mdp.validate();
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(ViolationList(violations)))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, MdpError> {
        Self::from_json_reader(s.as_bytes())
    }

    pub fn to_json_string(&self) -> String {
        let file = MdpFile {
            n_states: self.n_states,
            n_actions: self.n_actions,
            terminal: self.terminal_states.iter().copied().collect(),
            transitions: (0..self.n_states)
                .flat_map(|s| {
                    (0..self.n_actions).map(move |a| TransitionRow {
                        s,
                        a,
                        branches: self.branches(s, a).to_vec(),
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("MDP serialization cannot fail")
    }
}
