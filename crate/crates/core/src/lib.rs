//! Oracle-efficient adversarial contextual bandits.
//!
//! The learner in [`learner::RelaxLearner`] hallucinates a future of one-hot
//! Rademacher cost vectors, queries a value-of-ERM oracle `K + 1` times per
//! round and plays a water-filled distribution mixed with uniform
//! exploration. Baselines (exponential weights over policies, epsilon-greedy
//! and a dense-noise variant of the relaxation learner) share the same
//! estimator and episode loop. [`verify`] checks the admissibility and regret
//! guarantees numerically on small instances.

pub mod envs;
pub mod error;
pub mod estimator;
pub mod learner;
pub mod oracle;
pub mod relaxation;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::{
    policy_action, validate_distribution, ActionDistribution, Context, CostVector, EstimatedCost, HallucinationStep,
    Noise, Policy, PolicyClass, Rollout, RoundRecord, Sign,
};
