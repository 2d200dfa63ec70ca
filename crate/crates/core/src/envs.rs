//! Builders for the two reference environments and random property-test MDPs.
//!
//! The unstable grid moves in the chosen direction with probability
//! `p + (1-p)/4` and in each other direction with `(1-p)/4` (the random move
//! includes the intended direction). Walls bounce the agent back in place;
//! holes route to an absorbing damage sink. The corridor is deterministic:
//! up/down bump everywhere, left bumps at the start cell, and the move that
//! would enter the last cell pays +100 and lands in an absorbing goal sink.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{Branch, TabularMdp};

pub const ACTION_UP: usize = 0;
pub const ACTION_DOWN: usize = 1;
pub const ACTION_LEFT: usize = 2;
pub const ACTION_RIGHT: usize = 3;
pub const GRID_ACTIONS: usize = 4;

const DIRS: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("grid has no free cells")]
    NoFreeCells,
    #[error("p_intended {0} outside (0,1]")]
    BadIntendedProb(f64),
    #[error("map line {line}: unexpected character {ch:?}")]
    BadMapChar { line: usize, ch: char },
    #[error("map rows have inconsistent widths")]
    RaggedMap,
    #[error("map is empty")]
    EmptyMap,
    #[error("corridor length {0} must be at least 2")]
    CorridorTooShort(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCell {
    Free,
    Wall,
    Hole,
}

/// Geometry and kinetics of an unstable grid world.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major cell map, `width * height` entries.
    pub cells: Vec<GridCell>,
    /// Probability mass given to the chosen direction on top of the uniform
    /// `(1-p)/4` share every direction receives.
    pub p_intended: f64,
}

impl GridSpec {
    pub fn cell(&self, x: usize, y: usize) -> GridCell {
        self.cells[y * self.width + x]
    }

    /// Parses a plain-text map: `.` free, `#` wall, `O` hole, one row per line.
    pub fn from_map_str(map: &str, p_intended: f64) -> Result<Self, EnvError> {
        let mut cells = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, line) in map.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row: Vec<GridCell> = line
                .chars()
                .map(|ch| match ch {
                    '.' => Ok(GridCell::Free),
                    '#' => Ok(GridCell::Wall),
                    'O' => Ok(GridCell::Hole),
                    other => Err(EnvError::BadMapChar { line: i + 1, ch: other }),
                })
                .collect::<Result<_, _>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => return Err(EnvError::RaggedMap),
                _ => {}
            }
            cells.extend(row);
            height += 1;
        }
        let width = width.ok_or(EnvError::EmptyMap)?;
        let spec = GridSpec { width, height, cells, p_intended };
        spec.check()?;
        Ok(spec)
    }

    /// An open `width x height` grid with `n_holes` holes placed at seeded
    /// random positions. Retries placement until the free cells form one
    /// connected region with at least one hole on its boundary.
    pub fn random_holes(
        width: usize,
        height: usize,
        n_holes: usize,
        p_intended: f64,
        seed: u64,
    ) -> Result<Self, EnvError> {
        if width * height == 0 {
            return Err(EnvError::EmptyMap);
        }
        if n_holes + 1 > width * height {
            return Err(EnvError::InvalidParameter(format!(
                "{n_holes} holes cannot fit in a {width}x{height} grid"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _attempt in 0..10_000 {
            let mut cells = vec![GridCell::Free; width * height];
            let mut placed = 0;
            while placed < n_holes {
                let idx = rng.random_range(0..cells.len());
                if cells[idx] == GridCell::Free {
                    cells[idx] = GridCell::Hole;
                    placed += 1;
                }
            }
            let spec = GridSpec { width, height, cells, p_intended };
            if spec.free_region_connected() && (n_holes == 0 || spec.some_hole_reachable()) {
                spec.check()?;
                return Ok(spec);
            }
        }
        Err(EnvError::InvalidParameter(
            "could not place holes with a connected free region".into(),
        ))
    }

    fn check(&self) -> Result<(), EnvError> {
        if !(self.p_intended > 0.0 && self.p_intended <= 1.0) {
            return Err(EnvError::BadIntendedProb(self.p_intended));
        }
        if !self.cells.contains(&GridCell::Free) {
            return Err(EnvError::NoFreeCells);
        }
        Ok(())
    }

    fn free_region_connected(&self) -> bool {
        let free: Vec<usize> = (0..self.cells.len())
            .filter(|&i| self.cells[i] == GridCell::Free)
            .collect();
        let Some(&start) = free.first() else { return false };
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(idx) = stack.pop() {
            count += 1;
            let (x, y) = (idx % self.width, idx / self.width);
            for (dx, dy) in DIRS {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                    continue;
                }
                let nidx = ny as usize * self.width + nx as usize;
                if !seen[nidx] && self.cells[nidx] == GridCell::Free {
                    seen[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        count == free.len()
    }

    fn some_hole_reachable(&self) -> bool {
        (0..self.cells.len()).any(|idx| {
            if self.cells[idx] != GridCell::Hole {
                return false;
            }
            let (x, y) = (idx % self.width, idx / self.width);
            DIRS.iter().any(|&(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                nx >= 0
                    && ny >= 0
                    && nx < self.width as i64
                    && ny < self.height as i64
                    && self.cells[ny as usize * self.width + nx as usize] == GridCell::Free
            })
        })
    }
}

/// An unstable grid compiled to a tabular MDP, plus the state/cell mapping.
#[derive(Debug, Clone)]
pub struct BuiltGrid {
    pub mdp: TabularMdp,
    /// Terminal damage sink appended after the free-cell states.
    pub sink: usize,
    /// `(x, y)` coordinate of each free-cell state.
    pub cell_of_state: Vec<(usize, usize)>,
}

/// Compiles the grid kinetics into branches. States are the free cells plus
/// one damage sink; all rewards are zero.
pub fn build_unstable_grid(spec: &GridSpec) -> Result<BuiltGrid, EnvError> {
    spec.check()?;
    let mut state_of_cell = vec![None; spec.cells.len()];
    let mut cell_of_state = Vec::new();
    for y in 0..spec.height {
        for x in 0..spec.width {
            if spec.cell(x, y) == GridCell::Free {
                state_of_cell[y * spec.width + x] = Some(cell_of_state.len());
                cell_of_state.push((x, y));
            }
        }
    }
    let n_free = cell_of_state.len();
    let sink = n_free;
    let n_states = n_free + 1;
    let stray = (1.0 - spec.p_intended) / 4.0;

    let mut transitions = vec![Vec::new(); n_states * GRID_ACTIONS];
    for (state, &(x, y)) in cell_of_state.iter().enumerate() {
        for action in 0..GRID_ACTIONS {
            // (target, damage) -> merged probability
            let mut merged: Vec<(usize, u8, f64)> = Vec::new();
            for (dir, &(dx, dy)) in DIRS.iter().enumerate() {
                let prob = if dir == action { spec.p_intended + stray } else { stray };
                if prob == 0.0 {
                    continue;
                }
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                let out_of_bounds =
                    nx < 0 || ny < 0 || nx >= spec.width as i64 || ny >= spec.height as i64;
                let (target, damage) = if out_of_bounds {
                    (state, 0)
                } else {
                    match spec.cell(nx as usize, ny as usize) {
                        GridCell::Wall => (state, 0),
                        GridCell::Hole => (sink, 1),
                        GridCell::Free => {
                            (state_of_cell[ny as usize * spec.width + nx as usize].unwrap(), 0)
                        }
                    }
                };
                match merged.iter_mut().find(|(t, d, _)| *t == target && *d == damage) {
                    Some(entry) => entry.2 += prob,
                    None => merged.push((target, damage, prob)),
                }
            }
            let total: f64 = merged.iter().map(|(_, _, p)| p).sum();
            transitions[state * GRID_ACTIONS + action] = merged
                .into_iter()
                .map(|(t, d, p)| Branch { next_state: t, prob: p / total, reward: 0.0, damage: d })
                .collect();
        }
    }
    for action in 0..GRID_ACTIONS {
        transitions[sink * GRID_ACTIONS + action] =
            vec![Branch { next_state: sink, prob: 1.0, reward: 0.0, damage: 0 }];
    }

    let mdp = TabularMdp::from_parts(
        n_states,
        GRID_ACTIONS,
        transitions,
        BTreeSet::from([sink]),
    );
    debug_assert!(mdp.validate().is_empty());
    Ok(BuiltGrid { mdp, sink, cell_of_state })
}

/// A narrow corridor compiled to a tabular MDP.
#[derive(Debug, Clone)]
pub struct Corridor {
    pub mdp: TabularMdp,
    /// Leftmost corridor cell; episodes start here.
    pub start: usize,
    /// Absorbing goal; the move that would enter the last cell lands here
    /// with reward `goal_reward`.
    pub goal_sink: usize,
    pub damage_sink: usize,
    pub length: usize,
}

pub const CORRIDOR_GOAL_REWARD: f64 = 100.0;

/// Corridor of `length` cells indexed `0..length`, goal sink at `length`,
/// damage sink at `length + 1`. Deterministic moves: up/down bump everywhere,
/// left bumps at cell 0, right from the next-to-last cell pays +100 into the
/// goal sink, and right at the last cell exits safely with no reward.
pub fn build_corridor(length: usize) -> Result<Corridor, EnvError> {
    if length < 2 {
        return Err(EnvError::CorridorTooShort(length));
    }
    let goal_sink = length;
    let damage_sink = length + 1;
    let n_states = length + 2;
    let mut transitions = vec![Vec::new(); n_states * GRID_ACTIONS];

    let det = |target: usize, reward: f64, damage: u8| {
        vec![Branch { next_state: target, prob: 1.0, reward, damage }]
    };
    for i in 0..length {
        transitions[i * GRID_ACTIONS + ACTION_UP] = det(damage_sink, 0.0, 1);
        transitions[i * GRID_ACTIONS + ACTION_DOWN] = det(damage_sink, 0.0, 1);
        transitions[i * GRID_ACTIONS + ACTION_LEFT] = if i == 0 {
            det(damage_sink, 0.0, 1)
        } else {
            det(i - 1, 0.0, 0)
        };
        transitions[i * GRID_ACTIONS + ACTION_RIGHT] = if i == length - 2 {
            det(goal_sink, CORRIDOR_GOAL_REWARD, 0)
        } else if i == length - 1 {
            det(goal_sink, 0.0, 0)
        } else {
            det(i + 1, 0.0, 0)
        };
    }
    for sink in [goal_sink, damage_sink] {
        for action in 0..GRID_ACTIONS {
            transitions[sink * GRID_ACTIONS + action] = det(sink, 0.0, 0);
        }
    }

    let mdp = TabularMdp::from_parts(
        n_states,
        GRID_ACTIONS,
        transitions,
        BTreeSet::from([goal_sink, damage_sink]),
    );
    debug_assert!(mdp.validate().is_empty());
    Ok(Corridor { mdp, start: 0, goal_sink, damage_sink, length })
}

/// A connected random kernel, deterministic in the seed. Branch weights are
/// small integers, so every probability is at least `1 / (4 * branch_factor)`.
/// Action 0 of each state always includes an edge to the next state, keeping
/// the kernel connected.
pub fn gen_random_mdp(
    n_states: usize,
    n_actions: usize,
    branch_factor: usize,
    damage_density: f64,
    seed: u64,
) -> Result<TabularMdp, EnvError> {
    if n_states == 0 || n_actions == 0 || branch_factor == 0 {
        return Err(EnvError::InvalidParameter(
            "n_states, n_actions and branch_factor must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&damage_density) {
        return Err(EnvError::InvalidParameter(format!(
            "damage_density {damage_density} outside [0,1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = vec![Vec::new(); n_states * n_actions];
    let max_branches = branch_factor.min(n_states);
    for s in 0..n_states {
        for a in 0..n_actions {
            let n_branches = rng.random_range(1..=max_branches);
            let mut targets: Vec<usize> = Vec::with_capacity(n_branches);
            if a == 0 {
                targets.push((s + 1) % n_states);
            }
            while targets.len() < n_branches {
                let t = rng.random_range(0..n_states);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            let weights: Vec<u32> =
                targets.iter().map(|_| rng.random_range(1..=4u32)).collect();
            let total: u32 = weights.iter().sum();
            transitions[s * n_actions + a] = targets
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| Branch {
                    next_state: t,
                    prob: f64::from(w) / f64::from(total),
                    reward: rng.random_range(0..4) as f64,
                    damage: u8::from(rng.random::<f64>() < damage_density),
                })
                .collect();
        }
    }
    let mdp = TabularMdp::from_parts(n_states, n_actions, transitions, BTreeSet::new());
    debug_assert!(mdp.validate().is_empty());
    Ok(mdp)
}
