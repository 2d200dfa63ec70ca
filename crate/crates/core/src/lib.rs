//! Safe exploration at desk scale: detect everything unsafe in finite time,
//! then optimize only over what is left.
//!
//! Two complementary settings share one damage-signal model:
//!
//! - **Bandits** ([`bandit`]): every pull of an arm returns a binary damage
//!   indicator. The flawless inspector trims an arm at the first sign of
//!   damage; the relaxed inspector runs a one-sided SPRT per arm and trims
//!   once the log-likelihood ratio crosses `ln(1/alpha)`. Closed-form bounds
//!   on exposure, detection time and conservation are provided alongside.
//! - **Tabular MDPs** ([`mdp`], [`barrier`], [`assured`]): transitions carry a
//!   damage bit. A barrier table over state-action pairs (entries `0` or
//!   `-inf`) is learned by bootstrapped updates, converging to the exact
//!   unsafe set computed by [`barrier::bstar_oracle`]. Q-learning fused with
//!   the barrier masks condemned actions while optimizing reward.
//!
//! [`envs`] builds the two reference environments (unstable grid, narrow
//! corridor) and random kernels for property testing. All randomness flows
//! through caller-owned `rand::Rng` streams so runs are reproducible.

pub mod assured;
pub mod bandit;
pub mod barrier;
pub mod envs;
pub mod mdp;
pub mod xreal;

pub use xreal::XReal;
