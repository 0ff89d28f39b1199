use std::sync::Arc;

use crate::envs::ContextDistribution;
use crate::error::{input_err, Result};
use crate::estimator::estimate_cost;
use crate::oracle::{ErmOracle, ExhaustiveOracle};
use crate::relaxation::{sample_rollout_with, sample_sparse_rollout, Hallucination};
use crate::rng::{stream, Stream, StreamRng};
use crate::strategy::relaxation_strategy;
use crate::types::{
    check_gamma, validate_distribution, ActionDistribution, Context, CostVector, EstimatedCost, PolicyClass, RoundRecord,
};

use super::{observe, Learner};

/// The relaxation learner: one rollout per round, `K + 1` oracle calls,
/// water-filled `q*_t` mixed with `gamma / K` exploration.
///
/// With [`Hallucination::Dense`] the same pipeline runs on dense Rademacher
/// rollouts, which is the comparison variant.
pub struct RelaxLearner {
    gamma: f64,
    horizon: usize,
    num_actions: usize,
    hallucination: Hallucination,
    contexts: ContextDistribution,
    oracle: Box<dyn ErmOracle + Send>,
    history: Vec<(Context, EstimatedCost)>,
    rollout_rng: StreamRng,
    action_rng: StreamRng,
    estimator_rng: StreamRng,
    view: Option<MarginalView>,
    class: Arc<PolicyClass>,
    seed: u64,
}

/// Independent rollouts, oracle and stream for estimating the action law an
/// adversary may know. None of it touches the learner's own state.
struct MarginalView {
    rollouts: usize,
    oracle: ExhaustiveOracle,
    rng: StreamRng,
}

impl RelaxLearner {
    pub fn new(
        class: Arc<PolicyClass>,
        contexts: ContextDistribution,
        horizon: usize,
        gamma: f64,
        hallucination: Hallucination,
        seed: u64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        if contexts.num_contexts() != class.num_contexts() {
            return Err(input_err!(
                "context distribution covers {} contexts, policy class {}",
                contexts.num_contexts(),
                class.num_contexts()
            ));
        }
        Ok(Self {
            gamma,
            horizon,
            num_actions: class.num_actions(),
            hallucination,
            contexts,
            oracle: Box::new(ExhaustiveOracle::new(class.clone())),
            history: Vec::with_capacity(horizon),
            rollout_rng: stream(seed, Stream::Rollout),
            action_rng: stream(seed, Stream::Action),
            estimator_rng: stream(seed, Stream::Estimator),
            view: None,
            class,
            seed,
        })
    }

    /// Replaces the default exhaustive oracle, e.g. with an instrumented one.
    pub fn with_oracle(mut self, oracle: Box<dyn ErmOracle + Send>) -> Result<Self> {
        if oracle.class().num_actions() != self.num_actions {
            return Err(input_err!("oracle class has {} actions, learner {}", oracle.class().num_actions(), self.num_actions));
        }
        self.oracle = oracle;
        Ok(self)
    }

    pub fn history(&self) -> &[(Context, EstimatedCost)] {
        &self.history
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Learner for RelaxLearner {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn reveal_marginal(&mut self, rollouts: usize) {
        self.view = (rollouts > 0).then(|| MarginalView {
            rollouts,
            oracle: ExhaustiveOracle::new(self.class.clone()),
            rng: stream(self.seed, Stream::AdversaryView),
        });
    }

    fn play_round(
        &mut self,
        context: Context,
        feedback: &mut dyn FnMut(&ActionDistribution) -> Result<CostVector>,
    ) -> Result<RoundRecord> {
        let t = self.history.len() + 1;
        if t > self.horizon {
            return Err(input_err!("round {t} beyond horizon {}", self.horizon));
        }
        let calls_before = self.oracle.calls();
        let rollout = sample_rollout_with(
            self.hallucination,
            t,
            self.horizon,
            self.num_actions,
            self.gamma,
            &self.contexts,
            &mut self.rollout_rng,
        )?;
        let strategy = relaxation_strategy(&self.history, &rollout, context, self.gamma, self.num_actions, self.oracle.as_mut())?;
        let q = strategy.q;
        let shown = match self.view.as_mut() {
            Some(view) => {
                let mut mean = vec![0.0; self.num_actions];
                for _ in 0..view.rollouts {
                    let rho = sample_sparse_rollout(
                        self.hallucination,
                        t,
                        self.horizon,
                        self.num_actions,
                        self.gamma,
                        &self.contexts,
                        &mut view.rng,
                    )?;
                    let q = relaxation_strategy(&self.history, &rho, context, self.gamma, self.num_actions, &mut view.oracle)?.q;
                    mean.iter_mut().zip(q.probs()).for_each(|(m, p)| *m += p / view.rollouts as f64);
                }
                validate_distribution(mean)?
            }
            None => q.clone(),
        };
        let (costs, action, observed) = observe(&q, &shown, feedback, &mut self.action_rng)?;
        let estimate = estimate_cost(observed, action, &q, self.gamma, self.num_actions, &mut self.estimator_rng)?;
        self.history.push((context, estimate));
        Ok(RoundRecord {
            t,
            context,
            q,
            action,
            observed_cost: observed,
            estimate,
            oracle_calls: self.oracle.calls() - calls_before,
            costs,
        })
    }
}
