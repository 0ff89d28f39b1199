//! Online learners and the episode loop.
//!
//! Every learner plays a round through [`Learner::play_round`]: it publishes
//! `q_t`, the feedback callback (the environment) commits to `c_t` having
//! seen only `x_t` and `q_t`, and only then is the action drawn.
//!
//! The adversary may know the learner's action law but not the round's own
//! internal randomness. When `q_t` depends on a fresh rollout, the law is
//! the average of `q_t` over rollouts, so the relaxation learner shows an
//! adaptive adversary that average rather than the realized `q_t`.

mod exp4;
mod greedy;
mod relax;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use exp4::{default_learning_rate, Exp4Learner};
pub use greedy::EpsilonGreedyLearner;
pub use relax::RelaxLearner;

use crate::envs::{Adversary, AdversarySpec, ContextDistribution, Environment};
use crate::error::{config_err, input_err, Result};
use crate::oracle::best_fixed_policy_cost;
use crate::relaxation::Hallucination;
use crate::types::{ActionDistribution, Context, CostVector, PolicyClass, RoundRecord};

pub trait Learner {
    fn num_actions(&self) -> usize;

    /// Plays one round at `context`. `feedback` receives `q_t` and must
    /// return the committed cost vector.
    fn play_round(
        &mut self,
        context: Context,
        feedback: &mut dyn FnMut(&ActionDistribution) -> Result<CostVector>,
    ) -> Result<RoundRecord>;

    /// From now on hand `feedback` the round's action law averaged over the
    /// learner's fresh internal randomness, estimated from `rollouts`
    /// independent draws. Learners whose `q_t` is a function of the history
    /// alone already publish that law and ignore this.
    fn reveal_marginal(&mut self, _rollouts: usize) {}
}

/// Rollouts behind the action law shown to adaptive adversaries.
pub const ADVERSARY_VIEW_ROLLOUTS: usize = 16;

/// Shows the environment `shown`, takes `c_t`, then draws the action from
/// `q` and reads its cost.
pub(crate) fn observe<R: Rng + ?Sized>(
    q: &ActionDistribution,
    shown: &ActionDistribution,
    feedback: &mut dyn FnMut(&ActionDistribution) -> Result<CostVector>,
    rng: &mut R,
) -> Result<(CostVector, usize, f64)> {
    let costs = feedback(shown)?;
    if costs.len() != q.len() {
        return Err(input_err!("feedback returned {} costs, expected {}", costs.len(), q.len()));
    }
    let action = q.sample(rng);
    let observed = costs.get(action);
    Ok((costs, action, observed))
}

/// `min(1, (4 K ln|Pi| / T)^{1/3})` for a given `ln|Pi|`.
pub fn tuned_gamma(horizon: usize, num_actions: usize, log_class_size: f64) -> f64 {
    (4.0 * num_actions as f64 * log_class_size / horizon as f64).cbrt().min(1.0)
}

/// The exploration rate that balances the regret bound's two terms.
///
/// Logs a warning when `T <= 4 K ln|Pi|`, where the tuned value clamps at
/// one and the `T^{2/3}` rate no longer applies.
pub fn default_gamma(horizon: usize, num_actions: usize, class_size: usize) -> Result<f64> {
    if horizon == 0 || num_actions < 2 {
        return Err(input_err!("need T >= 1 and K >= 2 (got T = {horizon}, K = {num_actions})"));
    }
    if class_size < 2 {
        return Err(input_err!("gamma tuning needs |Pi| >= 2 (got {class_size})"));
    }
    let log_pi = (class_size as f64).ln();
    if horizon as f64 <= 4.0 * num_actions as f64 * log_pi {
        log::warn!("T = {horizon} <= 4 K ln|Pi| = {:.3}; tuned gamma clamps at 1", 4.0 * num_actions as f64 * log_pi);
    }
    Ok(tuned_gamma(horizon, num_actions, log_pi))
}

/// Learner configuration; `None` hyperparameters take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerSpec {
    Relax { gamma: Option<f64> },
    FullRademacher { gamma: Option<f64> },
    Exp4 { gamma: Option<f64>, learning_rate: Option<f64> },
    EpsilonGreedy {
        epsilon: f64,
        #[serde(default)]
        warm_start: usize,
    },
}

impl LearnerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Relax { .. } => "relax",
            Self::FullRademacher { .. } => "full-rademacher",
            Self::Exp4 { .. } => "exp4",
            Self::EpsilonGreedy { .. } => "epsilon-greedy",
        }
    }

    /// Oracle calls a round of this learner must issue, when fixed.
    pub fn calls_per_round(&self, num_actions: usize) -> Option<u64> {
        match self {
            Self::Relax { .. } | Self::FullRademacher { .. } => Some(num_actions as u64 + 1),
            Self::Exp4 { .. } => Some(0),
            Self::EpsilonGreedy { .. } => None,
        }
    }

    /// Exploration floor rate for the gamma-mixed learners.
    pub fn resolved_gamma(&self, horizon: usize, class: &PolicyClass) -> Result<Option<f64>> {
        let explicit = match self {
            Self::Relax { gamma } | Self::FullRademacher { gamma } | Self::Exp4 { gamma, .. } => *gamma,
            Self::EpsilonGreedy { .. } => return Ok(None),
        };
        match explicit {
            Some(g) => Ok(Some(g)),
            None => default_gamma(horizon, class.num_actions(), class.len()).map(Some),
        }
    }

    pub fn build(
        &self,
        class: Arc<PolicyClass>,
        contexts: &ContextDistribution,
        horizon: usize,
        seed: u64,
    ) -> Result<Box<dyn Learner + Send>> {
        let gamma = self.resolved_gamma(horizon, &class)?;
        Ok(match self {
            Self::Relax { .. } => Box::new(RelaxLearner::new(
                class,
                contexts.clone(),
                horizon,
                gamma.unwrap_or(1.0),
                Hallucination::OneHot,
                seed,
            )?),
            Self::FullRademacher { .. } => Box::new(RelaxLearner::new(
                class,
                contexts.clone(),
                horizon,
                gamma.unwrap_or(1.0),
                Hallucination::Dense,
                seed,
            )?),
            Self::Exp4 { learning_rate, .. } => {
                let lr = learning_rate.unwrap_or_else(|| default_learning_rate(horizon, class.num_actions(), class.len()));
                Box::new(Exp4Learner::new(class, horizon, gamma.unwrap_or(1.0), lr, seed)?)
            }
            Self::EpsilonGreedy { epsilon, warm_start } => {
                Box::new(EpsilonGreedyLearner::new(class, horizon, *epsilon, *warm_start, seed)?)
            }
        })
    }
}

/// Context law plus adversary.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub contexts: ContextDistribution,
    pub adversary: AdversarySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    /// `sum_t <q_t, c_t> - min_pi sum_t c_t(pi(x_t))`.
    pub expected_regret: f64,
    /// `sum_t c_t(y_t) - min_pi sum_t c_t(pi(x_t))`.
    pub realized_regret: f64,
    pub benchmark_cost: f64,
    pub benchmark_policy: usize,
    pub total_oracle_calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub records: Vec<RoundRecord>,
    pub report: RegretReport,
}

/// Regret of a finished trace against the best policy in hindsight.
pub fn regret_report(records: &[RoundRecord], class: &PolicyClass) -> Result<RegretReport> {
    let contexts: Vec<Context> = records.iter().map(|r| r.context).collect();
    let costs: Vec<CostVector> = records.iter().map(|r| r.costs.clone()).collect();
    let best = best_fixed_policy_cost(&contexts, &costs, class)?;
    let expected: f64 = records.iter().map(RoundRecord::expected_cost).sum();
    let realized: f64 = records.iter().map(|r| r.observed_cost).sum();
    Ok(RegretReport {
        expected_regret: expected - best.value,
        realized_regret: realized - best.value,
        benchmark_cost: best.value,
        benchmark_policy: best.argmin_policy,
        total_oracle_calls: records.iter().map(|r| r.oracle_calls).sum(),
    })
}

/// Expected regret after each prefix `1..=t` of the trace.
pub fn cumulative_expected_regret(records: &[RoundRecord], class: &PolicyClass) -> Vec<f64> {
    let mut per_policy = vec![0.0; class.len()];
    let mut learner = 0.0;
    records
        .iter()
        .map(|r| {
            learner += r.expected_cost();
            for (acc, p) in per_policy.iter_mut().zip(class.policies()) {
                *acc += r.costs.get(p.act(r.context));
            }
            learner - per_policy.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Plays `learner` against `env` for `horizon` rounds under `seed`.
pub fn run_episode(
    learner: &LearnerSpec,
    env: &EnvSpec,
    class: Arc<PolicyClass>,
    horizon: usize,
    seed: u64,
) -> Result<Episode> {
    if env.contexts.num_contexts() != class.num_contexts() {
        return Err(config_err!(
            "environment has {} contexts, policy class {}",
            env.contexts.num_contexts(),
            class.num_contexts()
        ));
    }
    env.adversary.validate(class.num_contexts(), class.num_actions(), horizon)?;
    let mut player = learner.build(class.clone(), &env.contexts, horizon, seed)?;
    if matches!(env.adversary, AdversarySpec::Adaptive(_)) {
        player.reveal_marginal(ADVERSARY_VIEW_ROLLOUTS);
    }
    let mut environment = Environment::new(env.contexts.clone(), Adversary::new(env.adversary.clone(), class.clone(), seed), seed);
    let mut records = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let x = environment.next_context();
        let record = player.play_round(x, &mut |q| environment.cost(t, x, q))?;
        records.push(record);
    }
    let report = regret_report(&records, &class)?;
    Ok(Episode { records, report })
}
