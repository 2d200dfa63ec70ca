//! Independent oracles for the acceptance suite: exhaustive policy
//! enumeration, value iteration, rollout averaging, and exact within-horizon
//! damage-hit probabilities (used to pick simulation-friendly corpora).

use rand::Rng;
use safe_explore_core::barrier::BarrierTable;
use safe_explore_core::envs::gen_random_mdp;
use safe_explore_core::mdp::TabularMdp;

/// Unsafe pairs by brute force over all deterministic stationary policies:
/// a pair is unsafe iff damage is reachable from it under every policy.
pub fn brute_force_unsafe_pairs(mdp: &TabularMdp) -> Vec<bool> {
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    let mut safe_under_some = vec![false; mdp.n_pairs()];
    for policy in all_policies(n_states, n_actions) {
        let mut dangerous = vec![false; n_states];
        loop {
            let mut changed = false;
            for s in 0..n_states {
                if !dangerous[s]
                    && mdp
                        .branches(s, policy[s])
                        .iter()
                        .any(|b| b.is_damage() || dangerous[b.next_state])
                {
                    dangerous[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let hit = mdp
                    .branches(s, a)
                    .iter()
                    .any(|b| b.is_damage() || dangerous[b.next_state]);
                if !hit {
                    safe_under_some[s * n_actions + a] = true;
                }
            }
        }
    }
    safe_under_some.into_iter().map(|safe| !safe).collect()
}

/// All deterministic stationary policies, in counting order.
pub fn all_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let count = (n_actions as u64).pow(n_states as u32);
    (0..count)
        .map(|code| {
            let mut c = code;
            (0..n_states)
                .map(|_| {
                    let a = (c % n_actions as u64) as usize;
                    c /= n_actions as u64;
                    a
                })
                .collect()
        })
        .collect()
}

/// Value iteration over the pairs a barrier leaves admissible. Condemned
/// entries stay zero and must not be read.
pub fn value_iteration_safe(
    mdp: &TabularMdp,
    admissible: &BarrierTable,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
) -> Vec<f64> {
    let n_actions = mdp.n_actions();
    let mut q = vec![0.0; mdp.n_pairs()];
    for _ in 0..max_sweeps {
        let prev = q.clone();
        let mut delta: f64 = 0.0;
        for s in 0..mdp.n_states() {
            for a in 0..n_actions {
                if admissible.is_condemned(s, a) {
                    continue;
                }
                let value: f64 = mdp
                    .branches(s, a)
                    .iter()
                    .map(|b| {
                        let boot = if mdp.is_terminal(b.next_state) {
                            0.0
                        } else {
                            (0..n_actions)
                                .filter(|&ap| !admissible.is_condemned(b.next_state, ap))
                                .map(|ap| prev[b.next_state * n_actions + ap])
                                .fold(f64::NEG_INFINITY, f64::max)
                        };
                        b.prob * (b.reward + gamma * boot)
                    })
                    .sum();
                delta = delta.max((value - prev[s * n_actions + a]).abs());
                q[s * n_actions + a] = value;
            }
        }
        if delta < tol {
            break;
        }
    }
    q
}

/// Monte-Carlo policy value at one pair: `None` if any rollout hit damage,
/// else the mean and standard error of the discounted returns.
#[allow(clippy::too_many_arguments)]
pub fn simulate_policy_value(
    mdp: &TabularMdp,
    policy: &[usize],
    gamma: f64,
    s0: usize,
    a0: usize,
    n_rollouts: usize,
    horizon: usize,
    rng: &mut impl Rng,
) -> Option<(f64, f64)> {
    let mut returns = Vec::with_capacity(n_rollouts);
    let mut damaged = false;
    for _ in 0..n_rollouts {
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut s = s0;
        let mut a = a0;
        for _ in 0..horizon {
            let (s_next, reward, damage) = mdp.step(s, a, rng).unwrap();
            total += discount * reward;
            discount *= gamma;
            damaged |= damage;
            if mdp.is_terminal(s_next) {
                break;
            }
            s = s_next;
            a = policy[s];
        }
        returns.push(total);
    }
    if damaged {
        return None;
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Probability of hitting damage within `horizon` steps starting from
/// `(s, a)` and then following `policy`, one entry per pair.
fn damage_hit_probs(mdp: &TabularMdp, policy: &[usize], horizon: usize) -> Vec<f64> {
    let mut state_hit = vec![0.0f64; mdp.n_states()];
    for _ in 0..horizon.saturating_sub(1) {
        let mut next = vec![0.0f64; mdp.n_states()];
        for s in 0..mdp.n_states() {
            next[s] = mdp
                .branches(s, policy[s])
                .iter()
                .map(|b| {
                    b.prob
                        * if b.is_damage() { 1.0 } else { state_hit[b.next_state] }
                })
                .sum();
        }
        state_hit = next;
    }
    let mut out = vec![0.0f64; mdp.n_pairs()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            out[s * mdp.n_actions() + a] = mdp
                .branches(s, a)
                .iter()
                .map(|b| {
                    b.prob
                        * if b.is_damage() { 1.0 } else { state_hit[b.next_state] }
                })
                .sum();
        }
    }
    out
}

/// First `count` random models (walking candidate seeds in order) whose
/// every positive within-`horizon` damage-hit probability is at least
/// `floor`, under every deterministic policy. On such models a rollout
/// simulation decides the condemned pattern reliably.
pub fn manifest_corpus(
    count: usize,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    floor: f64,
) -> Vec<TabularMdp> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 30_000u64;
    while out.len() < count {
        let density = [0.2, 0.35, 0.5][(seed % 3) as usize];
        let mdp = gen_random_mdp(n_states, n_actions, 2, density, seed).unwrap();
        seed += 1;
        let usable = all_policies(n_states, n_actions).iter().all(|policy| {
            damage_hit_probs(&mdp, policy, horizon)
                .iter()
                .all(|&q| q == 0.0 || q >= floor)
        });
        if usable {
            out.push(mdp);
        }
    }
    out
}
