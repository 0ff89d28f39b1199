use std::sync::Arc;

use rand::Rng;

use crate::error::{input_err, Result};
use crate::estimator::estimate_cost;
use crate::oracle::{ErmOracle, ErmQuery, ExhaustiveOracle};
use crate::rng::{stream, Stream, StreamRng};
use crate::types::{validate_distribution, ActionDistribution, Context, CostVector, EstimatedCost, PolicyClass, RoundRecord};

use super::Learner;

/// Epsilon-greedy over the ERM leader.
///
/// The first `warm_start` rounds play uniformly. Afterwards the learner
/// explores uniformly with probability `epsilon` and otherwise plays the
/// action of the ERM policy on past estimates. Only exploration draws feed
/// the estimator (as a uniform, `gamma = 1` estimate), which makes every
/// recorded estimate an `epsilon`-scaled unbiased one; the leader's argmin
/// is unaffected by that scale.
pub struct EpsilonGreedyLearner {
    epsilon: f64,
    warm_start: usize,
    horizon: usize,
    num_actions: usize,
    oracle: ExhaustiveOracle,
    history: Vec<(Context, EstimatedCost)>,
    action_rng: StreamRng,
    estimator_rng: StreamRng,
}

impl EpsilonGreedyLearner {
    pub fn new(class: Arc<PolicyClass>, horizon: usize, epsilon: f64, warm_start: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(input_err!("epsilon = {epsilon} outside [0, 1]"));
        }
        Ok(Self {
            epsilon,
            warm_start,
            horizon,
            num_actions: class.num_actions(),
            oracle: ExhaustiveOracle::new(class),
            history: Vec::with_capacity(horizon),
            action_rng: stream(seed, Stream::Action),
            estimator_rng: stream(seed, Stream::Estimator),
        })
    }
}

impl Learner for EpsilonGreedyLearner {
    fn num_actions(&self) -> usize {
        self.num_actions
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
        let k = self.num_actions;
        let uniform = ActionDistribution::uniform(k);
        let calls_before = self.oracle.calls();
        let (q, leader_action) = if t <= self.warm_start {
            (uniform.clone(), None)
        } else {
            let leader = self.oracle.value_of_erm(&ErmQuery::new(&self.history, &[]))?.argmin_policy;
            let a = self.oracle.class().policies()[leader].table()[context.id()];
            let mut probs = vec![self.epsilon / k as f64; k];
            probs[a] += 1.0 - self.epsilon;
            (validate_distribution(probs)?, Some(a))
        };
        let costs = feedback(&q)?;
        if costs.len() != k {
            return Err(input_err!("feedback returned {} costs, expected {k}", costs.len()));
        }
        // Two-stage draw with the same law as q: explore coin, then the action.
        let explore = match leader_action {
            None => true,
            Some(_) => self.action_rng.random::<f64>() < self.epsilon,
        };
        let action = match leader_action {
            Some(a) if !explore => a,
            _ => self.action_rng.random_range(0..k),
        };
        let observed = costs.get(action);
        let estimate = if explore {
            estimate_cost(observed, action, &uniform, 1.0, k, &mut self.estimator_rng)?
        } else {
            EstimatedCost::Zero
        };
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
