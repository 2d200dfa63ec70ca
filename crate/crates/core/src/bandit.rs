//! Safe multi-armed bandits: flawless and relaxed inspectors.
//!
//! Arms return a binary damage indicator instead of a reward. An arm is
//! unsafe when its damage probability exceeds the safety specification `mu`.
//! The flawless inspector (`mu = 0` in spirit) trims an arm at the first
//! damage; the relaxed inspector keeps a one-sided SPRT per arm, trimming
//! once its log-likelihood ratio reaches `ln(1/alpha)`.
//!
//! Both inspectors draw the arm uniformly from the candidate safe set, then
//! draw the damage bit, in that order, so traces are reproducible and
//! comparable across modes under a shared rng stream.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("arm {arm} out of range (n_arms = {n_arms})")]
    ArmOutOfRange { arm: usize, n_arms: usize },
    #[error("candidate safe set is empty")]
    EmptyCandidateSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no (mu - epsilon)-safe arms: conservation ratio undefined")]
    EmptySafeSet,
    #[error("mode mismatch: {0}")]
    ModeMismatch(&'static str),
    #[error("arm file line {line}: {message}")]
    ArmFile { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth arm parameters plus the safety specification.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    damage_probs: Vec<f64>,
    safety_spec: f64,
}

impl BanditInstance {
    pub fn new(damage_probs: Vec<f64>, safety_spec: f64) -> Result<Self, BanditError> {
        if damage_probs.is_empty() {
            return Err(BanditError::InvalidParameter("need at least one arm".into()));
        }
        for (a, &p) in damage_probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(BanditError::InvalidParameter(format!(
                    "arm {a}: damage probability {p} outside [0,1]"
                )));
            }
        }
        if !(0.0..1.0).contains(&safety_spec) {
            return Err(BanditError::InvalidParameter(format!(
                "safety specification {safety_spec} outside [0,1)"
            )));
        }
        Ok(BanditInstance { damage_probs, safety_spec })
    }

    /// Draws `n_arms` damage probabilities uniformly from `[lo, hi]`.
    pub fn generate(
        n_arms: usize,
        lo: f64,
        hi: f64,
        safety_spec: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, BanditError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0 && hi <= 1.0) {
            return Err(BanditError::InvalidParameter(format!("bad arm range [{lo}, {hi}]")));
        }
        let probs = (0..n_arms).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        BanditInstance::new(probs, safety_spec)
    }

    /// Reads one damage probability per line; blank lines are skipped.
    pub fn from_reader(reader: impl BufRead, safety_spec: f64) -> Result<Self, BanditError> {
        let mut probs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let p: f64 = trimmed.parse().map_err(|e| BanditError::ArmFile {
                line: i + 1,
                message: format!("{e}"),
            })?;
            probs.push(p);
        }
        BanditInstance::new(probs, safety_spec)
    }

    pub fn n_arms(&self) -> usize {
        self.damage_probs.len()
    }

    pub fn damage_prob(&self, arm: usize) -> f64 {
        self.damage_probs[arm]
    }

    pub fn safety_spec(&self) -> f64 {
        self.safety_spec
    }

    /// An arm is unsafe iff its damage probability strictly exceeds the spec.
    pub fn is_unsafe(&self, arm: usize) -> bool {
        self.damage_probs[arm] > self.safety_spec
    }

    pub fn unsafe_arms(&self) -> BTreeSet<usize> {
        (0..self.n_arms()).filter(|&a| self.is_unsafe(a)).collect()
    }

    pub fn n_unsafe(&self) -> usize {
        (0..self.n_arms()).filter(|&a| self.is_unsafe(a)).count()
    }

    /// Arms at least `epsilon` below the spec; the denominator of the
    /// conservation ratio.
    pub fn eps_safe_arms(&self, epsilon: f64) -> BTreeSet<usize> {
        (0..self.n_arms())
            .filter(|&a| self.damage_probs[a] <= self.safety_spec - epsilon)
            .collect()
    }
}

/// Pulls `arm` once, consuming exactly one rng draw.
pub fn sample_damage(
    instance: &BanditInstance,
    arm: usize,
    rng: &mut impl Rng,
) -> Result<bool, BanditError> {
    if arm >= instance.n_arms() {
        return Err(BanditError::ArmOutOfRange { arm, n_arms: instance.n_arms() });
    }
    Ok(rng.random::<f64>() < instance.damage_probs[arm])
}

/// Log-likelihood increment of the one-sided SPRT for one damage observation.
///
/// Returns `ln(mu / (mu - epsilon))` on damage and
/// `ln((1 - mu) / (1 - mu + epsilon))` otherwise. At `epsilon = mu` the
/// damage increment is `+inf`, forcing removal at the first damage.
pub fn sprt_increment(damage: bool, mu: f64, epsilon: f64) -> Result<f64, BanditError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(BanditError::InvalidParameter(format!("mu {mu} outside (0,1)")));
    }
    if !(epsilon > 0.0 && epsilon <= mu) {
        return Err(BanditError::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, mu = {mu}]"
        )));
    }
    Ok(if damage {
        (mu / (mu - epsilon)).ln()
    } else {
        ((1.0 - mu) / (1.0 - mu + epsilon)).ln()
    })
}

/// Kullback-Leibler divergence between Bernoulli(`mu`) and Bernoulli(`mu - epsilon`).
pub fn kl_bernoulli(mu: f64, epsilon: f64) -> Result<f64, BanditError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(BanditError::InvalidParameter(format!("mu {mu} outside (0,1)")));
    }
    if !(epsilon > 0.0 && epsilon < mu) {
        return Err(BanditError::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, mu = {mu})"
        )));
    }
    Ok(mu * (mu / (mu - epsilon)).ln() + (1.0 - mu) * ((1.0 - mu) / (1.0 - mu + epsilon)).ln())
}

/// Which decision rule the inspector runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InspectorMode {
    /// Remove an arm at the first observed damage.
    Flawless,
    /// Remove an arm once its SPRT statistic reaches `ln(1/alpha)`.
    Relaxed { epsilon: f64, alpha: f64 },
}

impl InspectorMode {
    fn check(&self, instance: &BanditInstance) -> Result<(), BanditError> {
        if let InspectorMode::Relaxed { epsilon, alpha } = *self {
            let mu = instance.safety_spec();
            if mu <= 0.0 {
                return Err(BanditError::InvalidParameter(
                    "relaxed mode needs a positive safety specification".into(),
                ));
            }
            if !(epsilon > 0.0 && epsilon <= mu) {
                return Err(BanditError::InvalidParameter(format!(
                    "epsilon {epsilon} outside (0, mu = {mu}]"
                )));
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(BanditError::InvalidParameter(format!("alpha {alpha} outside (0,1)")));
            }
        }
        Ok(())
    }

    /// Slack used when scoring conservation for this mode (0 for flawless).
    pub fn slack(&self) -> f64 {
        match *self {
            InspectorMode::Flawless => 0.0,
            InspectorMode::Relaxed { epsilon, .. } => epsilon,
        }
    }
}

/// The inspector's evolving knowledge: candidate safe set, per-arm SPRT
/// statistics and pull counts.
#[derive(Debug, Clone)]
pub struct InspectorState {
    /// Sorted candidate safe set.
    candidates: Vec<usize>,
    /// Per-arm log-likelihood ratios (relaxed mode; frozen once removed).
    llrs: Vec<f64>,
    pull_counts: Vec<u64>,
    round: u64,
    mode: InspectorMode,
}

/// What a single inspector round did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub arm: usize,
    pub damage: bool,
    pub removed: bool,
}

impl InspectorState {
    pub fn new(instance: &BanditInstance, mode: InspectorMode) -> Result<Self, BanditError> {
        mode.check(instance)?;
        let k = instance.n_arms();
        Ok(InspectorState {
            candidates: (0..k).collect(),
            llrs: vec![0.0; k],
            pull_counts: vec![0; k],
            round: 0,
            mode,
        })
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn llr(&self, arm: usize) -> f64 {
        self.llrs[arm]
    }

    pub fn pull_count(&self, arm: usize) -> u64 {
        self.pull_counts[arm]
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn mode(&self) -> InspectorMode {
        self.mode
    }

    fn draw_arm(&self, rng: &mut impl Rng) -> Result<usize, BanditError> {
        if self.candidates.is_empty() {
            return Err(BanditError::EmptyCandidateSet);
        }
        Ok(self.candidates[rng.random_range(0..self.candidates.len())])
    }

    fn remove(&mut self, arm: usize) {
        if let Ok(pos) = self.candidates.binary_search(&arm) {
            self.candidates.remove(pos);
        }
    }

    /// Runs one round in whatever mode this state was built with.
    pub fn step(
        &mut self,
        instance: &BanditInstance,
        rng: &mut impl Rng,
    ) -> Result<StepOutcome, BanditError> {
        match self.mode {
            InspectorMode::Flawless => flawless_step(self, instance, rng),
            InspectorMode::Relaxed { .. } => relaxed_step(self, instance, rng),
        }
    }
}

/// One round of the flawless inspector: uniform arm draw, then removal iff
/// the pull came back damaged.
pub fn flawless_step(
    state: &mut InspectorState,
    instance: &BanditInstance,
    rng: &mut impl Rng,
) -> Result<StepOutcome, BanditError> {
    if !matches!(state.mode, InspectorMode::Flawless) {
        return Err(BanditError::ModeMismatch("flawless_step on a relaxed inspector"));
    }
    let arm = state.draw_arm(rng)?;
    let damage = sample_damage(instance, arm, rng)?;
    state.round += 1;
    state.pull_counts[arm] += 1;
    if damage {
        state.remove(arm);
    }
    Ok(StepOutcome { arm, damage, removed: damage })
}

/// One round of the relaxed inspector: uniform arm draw, SPRT increment,
/// removal once the statistic reaches `ln(1/alpha)`.
pub fn relaxed_step(
    state: &mut InspectorState,
    instance: &BanditInstance,
    rng: &mut impl Rng,
) -> Result<StepOutcome, BanditError> {
    let InspectorMode::Relaxed { epsilon, alpha } = state.mode else {
        return Err(BanditError::ModeMismatch("relaxed_step on a flawless inspector"));
    };
    let arm = state.draw_arm(rng)?;
    let damage = sample_damage(instance, arm, rng)?;
    state.round += 1;
    state.pull_counts[arm] += 1;
    state.llrs[arm] += sprt_increment(damage, instance.safety_spec(), epsilon)?;
    let removed = state.llrs[arm] >= (1.0 / alpha).ln();
    if removed {
        state.remove(arm);
    }
    Ok(StepOutcome { arm, damage, removed })
}

/// One pull event as recorded in a run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullEvent {
    /// 1-based round index.
    pub round: u64,
    pub arm: usize,
    pub damage: bool,
    pub removed: bool,
}

/// Event log and summary metrics of one inspector run.
#[derive(Debug, Clone)]
pub struct BanditRunRecord {
    pub events: Vec<PullEvent>,
    /// Round at which each unsafe arm was removed.
    pub detection_times: BTreeMap<usize, u64>,
    /// Ground-truth unsafe arms (stopping oracle and metric labels only).
    pub unsafe_arms: BTreeSet<usize>,
    pub final_exposure: u64,
    /// `None` when no arm qualifies as `(mu - epsilon)`-safe.
    pub final_conservation: Option<f64>,
    pub stop_round: u64,
    /// False iff the horizon ran out before every unsafe arm was removed.
    pub complete: bool,
}

impl BanditRunRecord {
    /// Writes the event log as CSV with columns `t,arm,damage,removed`.
    pub fn write_events_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "t,arm,damage,removed")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{}",
                e.round,
                e.arm,
                u8::from(e.damage),
                u8::from(e.removed)
            )?;
        }
        Ok(())
    }
}

/// Pulls of unsafe arms in the first `round` rounds of the log.
pub fn exposure_at(record: &BanditRunRecord, round: u64) -> u64 {
    record
        .events
        .iter()
        .take_while(|e| e.round <= round)
        .filter(|e| record.unsafe_arms.contains(&e.arm))
        .count() as u64
}

/// Fraction of `(mu - epsilon)`-safe arms still in the candidate set.
pub fn conservation_ratio(
    candidates: &[usize],
    instance: &BanditInstance,
    epsilon: f64,
) -> Result<f64, BanditError> {
    let safe = instance.eps_safe_arms(epsilon);
    if safe.is_empty() {
        return Err(BanditError::EmptySafeSet);
    }
    let kept = candidates.iter().filter(|a| safe.contains(a)).count();
    Ok(kept as f64 / safe.len() as f64)
}

/// Runs the inspector until every unsafe arm is removed or `max_rounds` is
/// hit. Ground-truth labels steer only the stopping check and the metrics,
/// never the decision rule.
pub fn run_inspector(
    instance: &BanditInstance,
    mode: InspectorMode,
    rng: &mut impl Rng,
    max_rounds: u64,
) -> Result<BanditRunRecord, BanditError> {
    if max_rounds == 0 {
        return Err(BanditError::InvalidParameter("max_rounds must be positive".into()));
    }
    let mut state = InspectorState::new(instance, mode)?;
    let unsafe_arms = instance.unsafe_arms();
    let mut remaining = unsafe_arms.clone();
    let mut events = Vec::new();
    let mut detection_times = BTreeMap::new();
    let mut exposure: u64 = 0;

    while !remaining.is_empty() && state.round < max_rounds && !state.candidates.is_empty() {
        let out = state.step(instance, rng)?;
        events.push(PullEvent {
            round: state.round,
            arm: out.arm,
            damage: out.damage,
            removed: out.removed,
        });
        if unsafe_arms.contains(&out.arm) {
            exposure += 1;
        }
        if out.removed && remaining.remove(&out.arm) {
            detection_times.insert(out.arm, state.round);
        }
    }

    let complete = remaining.is_empty();
    let final_conservation =
        conservation_ratio(&state.candidates, instance, mode.slack()).ok();
    Ok(BanditRunRecord {
        events,
        detection_times,
        unsafe_arms,
        final_exposure: exposure,
        final_conservation,
        stop_round: state.round,
        complete,
    })
}

/// Closed-form bounds for the flawless inspector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlawlessBounds {
    /// Expected total pulls of unsafe arms: `sum_a 1/mu_a`.
    pub exposure: f64,
    /// Expected rounds to full detection under the uniform strategy:
    /// `(K/mu_low) * H_M`.
    pub time: f64,
}

/// Closed-form bounds for the relaxed inspector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedBounds {
    /// Lower bound on the expected conservation ratio: `1 - alpha`.
    pub conservation_lb: f64,
    /// Expected exposure: `M * (1 + ln(1/alpha) / kl(mu, mu - epsilon))`.
    pub exposure: f64,
    /// Expected rounds to full detection under the uniform strategy:
    /// `M * (K - M + 1) * (1 + ln(1/alpha) / kl)`.
    pub time: f64,
    /// Expected pulls of a single unsafe arm before its SPRT fires.
    pub sprt_per_arm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InspectorBounds {
    pub flawless: FlawlessBounds,
    /// Present only for relaxed-mode parameters.
    pub relaxed: Option<RelaxedBounds>,
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Evaluates every closed-form bound for the instance. With no unsafe arms
/// the exposure and time bounds are zero. The relaxed formulas accept
/// `alpha = 1` (the log term vanishes); `kl` domain errors propagate.
pub fn bounds(instance: &BanditInstance, mode: &InspectorMode) -> Result<InspectorBounds, BanditError> {
    let m = instance.n_unsafe();
    let k = instance.n_arms();
    let flawless = if m == 0 {
        FlawlessBounds { exposure: 0.0, time: 0.0 }
    } else {
        let exposure = instance
            .unsafe_arms()
            .iter()
            .map(|&a| 1.0 / instance.damage_prob(a))
            .sum();
        let mu_low = instance
            .unsafe_arms()
            .iter()
            .map(|&a| instance.damage_prob(a))
            .fold(f64::INFINITY, f64::min);
        FlawlessBounds { exposure, time: (k as f64 / mu_low) * harmonic(m) }
    };

    let relaxed = match *mode {
        InspectorMode::Flawless => None,
        InspectorMode::Relaxed { epsilon, alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(BanditError::InvalidParameter(format!("alpha {alpha} outside (0,1]")));
            }
            let kl = kl_bernoulli(instance.safety_spec(), epsilon)?;
            let sprt_per_arm = 1.0 + (1.0 / alpha).ln() / kl;
            Some(RelaxedBounds {
                conservation_lb: 1.0 - alpha,
                exposure: m as f64 * sprt_per_arm,
                time: (m * (k - m + 1)) as f64 * sprt_per_arm,
                sprt_per_arm,
            })
        }
    };

    Ok(InspectorBounds { flawless, relaxed })
}

/// Default horizon: ten times the matching detection-time bound, at least
/// one round per arm.
pub fn default_max_rounds(instance: &BanditInstance, mode: &InspectorMode) -> Result<u64, BanditError> {
    let b = bounds(instance, mode)?;
    let t = match b.relaxed {
        Some(r) => r.time,
        None => b.flawless.time,
    };
    Ok(((10.0 * t).ceil() as u64).max(instance.n_arms() as u64))
}
