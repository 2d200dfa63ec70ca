#![allow(dead_code)] // each test target uses a subset of these oracles

//! Independent oracles for cross-checking the library: exhaustive policy
//! enumeration for the unsafe set, value iteration for optimal values, and
//! rollout averaging for policy values. None of these share code with the
//! implementation paths they check.

use rand::Rng;
use safe_explore_core::barrier::BarrierTable;
use safe_explore_core::mdp::TabularMdp;

/// Unsafe pairs by brute force: a pair counts unsafe iff under every
/// deterministic stationary policy, damage is reachable with positive
/// probability from taking it. Flattened `s * n_actions + a`.
pub fn brute_force_unsafe_pairs(mdp: &TabularMdp) -> Vec<bool> {
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    let n_policies = (n_actions as u64).pow(n_states as u32);
    let mut safe_under_some_policy = vec![false; mdp.n_pairs()];

    for code in 0..n_policies {
        let mut c = code;
        let policy: Vec<usize> = (0..n_states)
            .map(|_| {
                let a = (c % n_actions as u64) as usize;
                c /= n_actions as u64;
                a
            })
            .collect();

        // States from which following the policy can reach damage.
        let mut dangerous = vec![false; n_states];
        loop {
            let mut changed = false;
            for s in 0..n_states {
                if dangerous[s] {
                    continue;
                }
                let hit = mdp
                    .branches(s, policy[s])
                    .iter()
                    .any(|b| b.is_damage() || dangerous[b.next_state]);
                if hit {
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
                let unsafe_here = mdp
                    .branches(s, a)
                    .iter()
                    .any(|b| b.is_damage() || dangerous[b.next_state]);
                if !unsafe_here {
                    safe_under_some_policy[s * n_actions + a] = true;
                }
            }
        }
    }

    safe_under_some_policy.iter().map(|&safe| !safe).collect()
}

/// Value iteration restricted to pairs the barrier leaves admissible.
/// Returns optimal action values for admissible pairs (condemned entries
/// are left at zero and must not be read). Bootstrap maxima range over
/// admissible successor actions only; terminal states bootstrap zero.
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
        let mut delta: f64 = 0.0;
        let prev = q.clone();
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

/// Monte-Carlo estimate of the policy's action value at one pair: roll out
/// `n_rollouts` discounted trajectories. Returns `None` if any rollout hit
/// damage (the extended-real value is `-inf`), else the sample mean and
/// standard error of the discounted returns.
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
            if damage {
                damaged = true;
            }
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
    let var = if returns.len() > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, (var / n).sqrt()))
}

/// Enumerates all deterministic stationary policies.
pub fn all_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let n_policies = (n_actions as u64).pow(n_states as u32);
    (0..n_policies)
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
