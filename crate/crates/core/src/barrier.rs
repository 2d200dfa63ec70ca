//! Barrier tables over state-action pairs and the algorithms that learn them.
//!
//! A barrier entry is `0` (no damage ever observed or implied) or `-inf`
//! (condemned). The single update rule
//! `B(s,a) <- B(s,a) + log(1-d) + max_a' B(s',a')` condemns a pair on
//! observed damage and bootstraps condemnation backwards from successor
//! states whose every action is condemned. [`bstar_oracle`] computes the
//! exact fixed point by set closure; [`barrier_learner`] reaches it from
//! sampled transitions in expected finite time, with [`bound_barrier_time`]
//! giving the closed-form bound in terms of the lag partition.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::mdp::TabularMdp;
use crate::xreal::XReal;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
}

/// Safety knowledge over `(s, a)` pairs; entries are exactly `0` or `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierTable {
    values: Vec<XReal>,
    n_states: usize,
    n_actions: usize,
}

impl BarrierTable {
    /// The all-zero table (nothing condemned yet).
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        BarrierTable { values: vec![XReal::ZERO; n_states * n_actions], n_states, n_actions }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> XReal {
        self.values[s * self.n_actions + a]
    }

    pub fn is_condemned(&self, s: usize, a: usize) -> bool {
        self.get(s, a).is_neg_inf()
    }

    pub fn condemn(&mut self, s: usize, a: usize) {
        self.values[s * self.n_actions + a] = XReal::NegInf;
    }

    /// `max_a B(s, a)`: `-inf` iff every action at `s` is condemned.
    pub fn max_over_actions(&self, s: usize) -> XReal {
        (0..self.n_actions)
            .map(|a| self.get(s, a))
            .fold(XReal::NegInf, XReal::max)
    }

    pub fn all_actions_condemned(&self, s: usize) -> bool {
        self.max_over_actions(s).is_neg_inf()
    }

    pub fn n_condemned(&self) -> usize {
        self.values.iter().filter(|v| v.is_neg_inf()).count()
    }

    /// States whose every action is condemned.
    pub fn n_condemned_states(&self) -> usize {
        (0..self.n_states).filter(|&s| self.all_actions_condemned(s)).count()
    }

    pub fn condemned_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .filter(|&(s, a)| self.is_condemned(s, a))
            .collect()
    }

    /// True if every pair condemned here is also condemned in `other`.
    pub fn subset_of(&self, other: &BarrierTable) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(mine, theirs)| !mine.is_neg_inf() || theirs.is_neg_inf())
    }
}

/// Folds one observed transition into the table:
/// `B(s,a) <- B(s,a) + log(1-d) + max_a' B(s',a')` in extended-real
/// arithmetic. Returns true if `(s, a)` was newly condemned.
pub fn barrier_update(
    table: &mut BarrierTable,
    s: usize,
    a: usize,
    s_next: usize,
    damage: bool,
) -> bool {
    let was = table.is_condemned(s, a);
    let indicator = if damage { XReal::NegInf } else { XReal::ZERO };
    let updated = table.get(s, a) + indicator + table.max_over_actions(s_next);
    table.values[s * table.n_actions + a] = updated;
    !was && updated.is_neg_inf()
}

/// Exact optimal barrier by backward closure: seed with the pairs that can
/// damage immediately, then repeatedly condemn any pair that can reach a
/// state whose every action is condemned. Terminates in at most
/// `|S| * |A|` sweeps; the result is the greatest `{0, -inf}` fixed point of
/// the barrier Bellman equation.
pub fn bstar_oracle(mdp: &TabularMdp) -> BarrierTable {
    let mut table = BarrierTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if mdp.branches(s, a).iter().any(|b| b.is_damage()) {
                table.condemn(s, a);
            }
        }
    }
    loop {
        let mut changed = false;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                if table.is_condemned(s, a) {
                    continue;
                }
                let doomed = mdp
                    .branches(s, a)
                    .iter()
                    .any(|b| table.all_actions_condemned(b.next_state));
                if doomed {
                    table.condemn(s, a);
                    changed = true;
                }
            }
        }
        if !changed {
            return table;
        }
    }
}

/// Checks that `table` is the greatest `{0, -inf}` fixed point of the
/// barrier Bellman equation, by iterating the one-step update downward from
/// the all-zero table until it stabilizes and comparing. This is an
/// independent route from the damage-seeded closure in [`bstar_oracle`]: a
/// merely self-consistent table (e.g. all `-inf` on a damage-free model) is
/// rejected.
pub fn bellman_residual(table: &BarrierTable, mdp: &TabularMdp) -> bool {
    let mut current = BarrierTable::zeros(mdp.n_states(), mdp.n_actions());
    loop {
        let mut next = current.clone();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let value = mdp
                    .branches(s, a)
                    .iter()
                    .map(|b| {
                        let indicator = if b.is_damage() { XReal::NegInf } else { XReal::ZERO };
                        indicator + current.max_over_actions(b.next_state)
                    })
                    .fold(XReal::ZERO, |acc, v| acc + v);
                next.values[s * next.n_actions + a] = value;
            }
        }
        if next == current {
            return *table == current;
        }
        current = next;
    }
}

/// Level sets of forced unsafety.
#[derive(Debug, Clone, PartialEq)]
pub struct LagPartition {
    /// `unsafe_levels[0]` holds states where every action can damage
    /// immediately; level `l` holds states forced (under every action) into
    /// earlier levels with positive probability.
    pub unsafe_levels: Vec<Vec<usize>>,
    /// States with at least one action avoiding the unsafe levels.
    pub safe_remainder: Vec<usize>,
    /// Number of nonempty unsafe levels.
    pub lag: usize,
}

/// Builds the recursive level-set partition of the state space.
pub fn lag_partition(mdp: &TabularMdp) -> LagPartition {
    let mut assigned = vec![false; mdp.n_states()];
    let mut levels: Vec<Vec<usize>> = Vec::new();

    // Level 1: every action has positive immediate damage probability.
    let first: Vec<usize> = (0..mdp.n_states())
        .filter(|&s| {
            (0..mdp.n_actions()).all(|a| mdp.branches(s, a).iter().any(|b| b.is_damage()))
        })
        .collect();
    if !first.is_empty() {
        for &s in &first {
            assigned[s] = true;
        }
        levels.push(first);
        loop {
            let next: Vec<usize> = (0..mdp.n_states())
                .filter(|&s| !assigned[s])
                .filter(|&s| {
                    (0..mdp.n_actions()).all(|a| {
                        mdp.branches(s, a).iter().any(|b| assigned[b.next_state])
                    })
                })
                .collect();
            if next.is_empty() {
                break;
            }
            for &s in &next {
                assigned[s] = true;
            }
            levels.push(next);
        }
    }

    let safe_remainder: Vec<usize> = (0..mdp.n_states()).filter(|&s| !assigned[s]).collect();
    let lag = levels.len();
    LagPartition { unsafe_levels: levels, safe_remainder, lag }
}

/// Closed-form bound on the expected detection-completion step of the
/// barrier learner: `(L+1) * (|S||A| / mu) * H_{|S||A|}` with `mu` the
/// minimum nonzero transition probability and `L` the lag.
pub fn bound_barrier_time(mdp: &TabularMdp) -> f64 {
    let pairs = mdp.n_pairs();
    let mu = mdp.min_nonzero_prob();
    let lag = lag_partition(mdp).lag;
    (lag as f64 + 1.0) * (pairs as f64 / mu) * crate::bandit::harmonic(pairs)
}

/// One sampled transition in a learner trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierTraceStep {
    /// 1-based step index.
    pub step: u64,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub damage: bool,
    pub newly_condemned: bool,
    pub n_condemned: usize,
}

/// Outcome of a barrier-learner run.
#[derive(Debug, Clone)]
pub struct BarrierRunResult {
    pub barrier: BarrierTable,
    pub trace: Vec<BarrierTraceStep>,
    /// Per `(s, a)` (flattened `s * n_actions + a`): the step at which the
    /// pair was condemned.
    pub detection_steps: Vec<Option<u64>>,
    /// Step at which the table matched the oracle, if it did.
    pub completion_step: Option<u64>,
    pub complete: bool,
}

impl BarrierRunResult {
    /// Trace CSV: `step,s,a,s_next,d,newly_condemned,n_condemned`.
    pub fn write_trace_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "step,s,a,s_next,d,newly_condemned,n_condemned")?;
        for t in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t.step,
                t.s,
                t.a,
                t.s_next,
                u8::from(t.damage),
                u8::from(t.newly_condemned),
                t.n_condemned
            )?;
        }
        Ok(())
    }

    /// Summary CSV: per-pair detection step plus the bound inputs.
    pub fn write_summary_csv(&self, mdp: &TabularMdp, w: &mut impl Write) -> std::io::Result<()> {
        let bound = bound_barrier_time(mdp);
        let lag = lag_partition(mdp).lag;
        let mu = mdp.min_nonzero_prob();
        writeln!(w, "s,a,detection_step,bound,lag,mu")?;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let det = match self.detection_steps[s * mdp.n_actions() + a] {
                    Some(step) => step.to_string(),
                    None => String::new(),
                };
                writeln!(w, "{s},{a},{det},{bound},{lag},{mu}")?;
            }
        }
        Ok(())
    }
}

/// Runs the barrier learner: draw a pair uniformly from the not-yet-condemned
/// set, sample one transition, fold it in. The precomputed oracle is used
/// only to stop the experiment once the table is exact; the learner itself
/// never reads it.
pub fn barrier_learner(
    mdp: &TabularMdp,
    rng: &mut impl Rng,
    max_steps: u64,
) -> Result<BarrierRunResult, BarrierError> {
    if max_steps == 0 {
        return Err(BarrierError::ZeroMaxSteps);
    }
    let target = bstar_oracle(mdp);
    let target_condemned = target.n_condemned();

    let mut table = BarrierTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut candidates: Vec<(usize, usize)> = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .collect();
    let mut detection_steps = vec![None; mdp.n_pairs()];
    let mut trace = Vec::new();
    let mut n_condemned = 0usize;
    let mut completion_step = if target_condemned == 0 { Some(0) } else { None };

    let mut step = 0u64;
    while completion_step.is_none() && step < max_steps && !candidates.is_empty() {
        step += 1;
        let pick = rng.random_range(0..candidates.len());
        let (s, a) = candidates[pick];
        let (s_next, _reward, damage) = mdp.step(s, a, rng).expect("candidate pair in range");
        let newly = barrier_update(&mut table, s, a, s_next, damage);
        if newly {
            n_condemned += 1;
            detection_steps[s * mdp.n_actions() + a] = Some(step);
            candidates.remove(pick);
            debug_assert!(target.is_condemned(s, a), "learner condemned a safe pair");
            if n_condemned == target_condemned {
                completion_step = Some(step);
            }
        }
        trace.push(BarrierTraceStep {
            step,
            s,
            a,
            s_next,
            damage,
            newly_condemned: newly,
            n_condemned,
        });
    }

    let complete = completion_step.is_some();
    debug_assert!(!complete || table == target);
    Ok(BarrierRunResult { barrier: table, trace, detection_steps, completion_step, complete })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{
        build_corridor, build_unstable_grid, gen_random_mdp, GridSpec, ACTION_LEFT,
        ACTION_RIGHT, GRID_ACTIONS,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn update_condemns_on_damage() {
        let mut b = BarrierTable::zeros(2, 2);
        assert!(barrier_update(&mut b, 0, 1, 1, true));
        assert!(b.is_condemned(0, 1));
        assert_eq!(b.n_condemned(), 1);
    }

    #[test]
    fn update_without_damage_leaves_zeros() {
        let mut b = BarrierTable::zeros(2, 2);
        assert!(!barrier_update(&mut b, 0, 0, 1, false));
        assert_eq!(b, BarrierTable::zeros(2, 2));
    }

    #[test]
    fn update_bootstraps_from_dead_successor() {
        let mut b = BarrierTable::zeros(2, 2);
        b.condemn(1, 0);
        b.condemn(1, 1);
        assert!(barrier_update(&mut b, 0, 0, 1, false));
        assert!(b.is_condemned(0, 0));
    }

    #[test]
    fn oracle_all_zero_without_damage() {
        let mdp = gen_random_mdp(4, 2, 3, 0.0, 7).unwrap();
        let b = bstar_oracle(&mdp);
        assert_eq!(b.n_condemned(), 0);
        assert!(bellman_residual(&b, &mdp));
    }

    #[test]
    fn oracle_on_corridor_matches_enumeration() {
        let c = build_corridor(15).unwrap();
        let b = bstar_oracle(&c.mdp);
        assert_eq!(b.n_condemned(), 31);
        for i in 0..15 {
            assert!(!b.is_condemned(i, ACTION_RIGHT));
            assert!(b.is_condemned(i, 0));
            assert!(b.is_condemned(i, 1));
        }
        assert!(b.is_condemned(0, ACTION_LEFT));
        assert!(!b.is_condemned(1, ACTION_LEFT));
        assert!(bellman_residual(&b, &c.mdp));
    }

    #[test]
    fn oracle_condemns_whole_grid() {
        let spec = GridSpec::random_holes(5, 5, 2, 0.6, 3).unwrap();
        let built = build_unstable_grid(&spec).unwrap();
        let b = bstar_oracle(&built.mdp);
        for s in 0..built.sink {
            for a in 0..GRID_ACTIONS {
                assert!(b.is_condemned(s, a), "grid pair ({s},{a}) should be unsafe");
            }
        }
        // The sink itself stays safe.
        assert!(!b.all_actions_condemned(built.sink));
    }

    #[test]
    fn residual_rejects_wrong_tables() {
        let c = build_corridor(4).unwrap();
        // All-zero on a damaged model: not a fixed point.
        assert!(!bellman_residual(&BarrierTable::zeros(6, 4), &c.mdp));
        // All -inf on a damage-free model: a fixed point, but not the greatest.
        let clean = gen_random_mdp(3, 2, 2, 0.0, 1).unwrap();
        let mut all_dead = BarrierTable::zeros(3, 2);
        for s in 0..3 {
            for a in 0..2 {
                all_dead.condemn(s, a);
            }
        }
        assert!(!bellman_residual(&all_dead, &clean));
    }

    #[test]
    fn lag_partition_corridor_is_all_safe() {
        let c = build_corridor(15).unwrap();
        let p = lag_partition(&c.mdp);
        assert_eq!(p.lag, 0);
        assert!(p.unsafe_levels.is_empty());
        assert_eq!(p.safe_remainder.len(), c.mdp.n_states());
    }

    #[test]
    fn lag_partition_forced_chain() {
        use crate::mdp::Branch;
        use std::collections::BTreeSet;
        // s1 is forced into s0; every action at s0 damages.
        let dmg = |t| vec![Branch { next_state: t, prob: 1.0, reward: 0.0, damage: 1 }];
        let go = |t| vec![Branch { next_state: t, prob: 1.0, reward: 0.0, damage: 0 }];
        let mdp = crate::mdp::TabularMdp::from_parts(
            2,
            2,
            vec![dmg(0), dmg(0), go(0), go(0)],
            BTreeSet::new(),
        );
        let p = lag_partition(&mdp);
        assert_eq!(p.lag, 2);
        assert_eq!(p.unsafe_levels, vec![vec![0], vec![1]]);
        assert!(p.safe_remainder.is_empty());
    }

    #[test]
    fn lag_partition_grid_has_empty_remainder() {
        let spec = GridSpec::random_holes(5, 5, 2, 0.6, 11).unwrap();
        let built = build_unstable_grid(&spec).unwrap();
        let p = lag_partition(&built.mdp);
        // The sink is safe; every grid state sits in some unsafe level.
        assert_eq!(p.safe_remainder, vec![built.sink]);
        let leveled: usize = p.unsafe_levels.iter().map(Vec::len).sum();
        assert_eq!(leveled, built.sink);
        assert!(p.lag >= 1);
    }

    #[test]
    fn bound_plug_ins() {
        let c = build_corridor(15).unwrap();
        // 17 states, 4 actions, mu = 1, L = 0.
        let pairs = 68.0;
        let expect = pairs * crate::bandit::harmonic(68);
        assert!((bound_barrier_time(&c.mdp) - expect).abs() < 1e-9);
        // Degenerate single-pair model: every factor is 1.
        let one = gen_random_mdp(1, 1, 1, 0.0, 0).unwrap();
        assert_eq!(bound_barrier_time(&one), 1.0);
    }

    #[test]
    fn learner_stays_at_zero_without_damage() {
        let mdp = gen_random_mdp(4, 2, 3, 0.0, 5).unwrap();
        let run = barrier_learner(&mdp, &mut rng(0), 500).unwrap();
        assert!(run.complete);
        assert_eq!(run.completion_step, Some(0));
        assert_eq!(run.barrier.n_condemned(), 0);
    }

    #[test]
    fn learner_finds_corridor_unsafe_set() {
        let c = build_corridor(8).unwrap();
        let cap = (20.0 * bound_barrier_time(&c.mdp)) as u64;
        let run = barrier_learner(&c.mdp, &mut rng(17), cap).unwrap();
        assert!(run.complete, "did not finish in {cap} steps");
        assert_eq!(run.barrier, bstar_oracle(&c.mdp));
        assert_eq!(run.barrier.n_condemned(), 2 * 8 + 1);
        // Condemned set grows monotonically along the trace.
        let mut last = 0;
        for t in &run.trace {
            assert!(t.n_condemned >= last);
            last = t.n_condemned;
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let c = build_corridor(3).unwrap();
        let run = barrier_learner(&c.mdp, &mut rng(2), 10_000).unwrap();
        let mut buf = Vec::new();
        run.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,s,a,s_next,d,newly_condemned,n_condemned"));
        assert_eq!(text.lines().count() as u64, run.trace.len() as u64 + 1);
        let mut buf = Vec::new();
        run.write_summary_csv(&c.mdp, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("s,a,detection_step,bound,lag,mu"));
    }
}
