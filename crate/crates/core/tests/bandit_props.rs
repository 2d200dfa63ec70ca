//! Pathwise invariants of the two inspectors.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_explore_core::bandit::{
    run_inspector, BanditInstance, InspectorMode, InspectorState,
};

mod common;

fn arm_probs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The candidate set only ever shrinks, in both modes.
    #[test]
    fn candidate_set_monotone(probs in arm_probs(), seed in any::<u64>(), relaxed in any::<bool>()) {
        let spec = if relaxed { 0.3 } else { 0.0 };
        let instance = BanditInstance::new(probs, spec).unwrap();
        let mode = if relaxed {
            InspectorMode::Relaxed { epsilon: 0.15, alpha: 0.2 }
        } else {
            InspectorMode::Flawless
        };
        let mut state = InspectorState::new(&instance, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut previous: Vec<usize> = state.candidates().to_vec();
        for _ in 0..200 {
            if state.candidates().is_empty() {
                break;
            }
            state.step(&instance, &mut rng).unwrap();
            let current = state.candidates().to_vec();
            prop_assert!(current.iter().all(|a| previous.contains(a)), "candidate set grew");
            previous = current;
            let pulls: u64 = (0..instance.n_arms()).map(|a| state.pull_count(a)).sum();
            prop_assert_eq!(pulls, state.round(), "pull counts out of sync with the round");
        }
    }

    // Flawless soundness is pathwise exact: a zero-probability arm is never removed.
    #[test]
    fn flawless_never_removes_flawless_arms(
        hot in prop::collection::vec(0.01..=1.0f64, 1..5),
        n_cold in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut probs = hot;
        probs.extend(std::iter::repeat_n(0.0, n_cold));
        let instance = BanditInstance::new(probs.clone(), 0.0).unwrap();
        let record = run_inspector(&instance, InspectorMode::Flawless, &mut ChaCha8Rng::seed_from_u64(seed), 100_000).unwrap();
        prop_assert!(record.complete, "all damaging arms have positive probability");
        for event in record.events.iter().filter(|e| e.removed) {
            prop_assert!(probs[event.arm] > 0.0, "removed a flawless arm");
        }
    }

    // Exposure equals the summed pull counts of unsafe arms at every prefix.
    #[test]
    fn exposure_identity_along_the_run(probs in arm_probs(), seed in any::<u64>()) {
        let instance = BanditInstance::new(probs, 0.2).unwrap();
        let record = run_inspector(
            &instance,
            InspectorMode::Relaxed { epsilon: 0.1, alpha: 0.3 },
            &mut ChaCha8Rng::seed_from_u64(seed),
            2_000,
        ).unwrap();
        let mut pulls_of_unsafe = 0u64;
        for event in &record.events {
            if record.unsafe_arms.contains(&event.arm) {
                pulls_of_unsafe += 1;
            }
            prop_assert_eq!(
                safe_explore_core::bandit::exposure_at(&record, event.round),
                pulls_of_unsafe
            );
        }
    }

    // Only the pulled arm's statistic moves; removed arms stay frozen.
    #[test]
    fn llr_bookkeeping(seed in any::<u64>()) {
        let instance = BanditInstance::new(vec![0.5, 0.4, 0.05, 0.0], 0.2).unwrap();
        let mode = InspectorMode::Relaxed { epsilon: 0.1, alpha: 0.2 };
        let mut state = InspectorState::new(&instance, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frozen: Vec<(usize, f64)> = Vec::new();
        for _ in 0..300 {
            if state.candidates().is_empty() {
                break;
            }
            let before: Vec<f64> = (0..4).map(|a| state.llr(a)).collect();
            let out = state.step(&instance, &mut rng).unwrap();
            for (a, &llr_before) in before.iter().enumerate() {
                if a != out.arm {
                    prop_assert_eq!(state.llr(a), llr_before, "untouched arm moved");
                }
            }
            for &(arm, value) in &frozen {
                prop_assert_eq!(state.llr(arm), value, "removed arm's statistic moved");
            }
            let threshold = (1.0f64 / 0.2).ln();
            for &arm in state.candidates() {
                prop_assert!(state.llr(arm) < threshold, "candidate at or past the threshold");
            }
            if out.removed {
                frozen.push((out.arm, state.llr(out.arm)));
            }
        }
    }

    // With slack a hair under the spec, the relaxed inspector replays the
    // flawless one exactly: same rng stream, same removal trace.
    #[test]
    fn relaxed_at_limit_slack_equals_flawless(seed in any::<u64>()) {
        let probs = vec![0.0, 0.55, 0.0, 0.8, 1.0, 0.0];
        let mu = 0.1;
        let flawless_inst = BanditInstance::new(probs.clone(), mu).unwrap();
        let relaxed_inst = BanditInstance::new(probs, mu).unwrap();
        let beta = 1.0 - 1e-6;
        let flawless = run_inspector(
            &flawless_inst,
            InspectorMode::Flawless,
            &mut ChaCha8Rng::seed_from_u64(seed),
            50_000,
        ).unwrap();
        let relaxed = run_inspector(
            &relaxed_inst,
            InspectorMode::Relaxed { epsilon: beta * mu, alpha: 0.1 },
            &mut ChaCha8Rng::seed_from_u64(seed),
            50_000,
        ).unwrap();
        prop_assert_eq!(flawless.events.len(), relaxed.events.len());
        for (a, b) in flawless.events.iter().zip(&relaxed.events) {
            prop_assert_eq!(a, b);
        }
    }
}

// Flawless completeness: with every arm damage-prone, detection always
// finishes at a generous horizon.
#[test]
fn flawless_completes_on_every_seed() {
    let instance = BanditInstance::new(vec![0.05, 0.3, 0.9, 0.15], 0.0).unwrap();
    for seed in 0..500 {
        let record = run_inspector(
            &instance,
            InspectorMode::Flawless,
            &mut ChaCha8Rng::seed_from_u64(seed),
            200_000,
        )
        .unwrap();
        assert!(record.complete, "seed {seed} did not finish");
        assert_eq!(record.detection_times.len(), 4);
    }
}
