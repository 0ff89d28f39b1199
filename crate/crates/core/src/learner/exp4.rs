use std::sync::Arc;

use crate::error::{input_err, Result};
use crate::estimator::estimate_cost;
use crate::rng::{stream, Stream, StreamRng};
use crate::types::{check_gamma, validate_distribution, ActionDistribution, Context, CostVector, PolicyClass, RoundRecord};

use super::{observe, Learner};

/// `sqrt(ln|Pi| / (T K))`.
pub fn default_learning_rate(horizon: usize, num_actions: usize, class_size: usize) -> f64 {
    ((class_size as f64).ln() / (horizon as f64 * num_actions as f64)).sqrt()
}

/// Exponential weights over the policy class (one expert per policy).
///
/// Weights live in log space and are shifted by their maximum after every
/// update, so long runs never underflow.
pub struct Exp4Learner {
    class: Arc<PolicyClass>,
    gamma: f64,
    learning_rate: f64,
    horizon: usize,
    log_weights: Vec<f64>,
    t: usize,
    action_rng: StreamRng,
    estimator_rng: StreamRng,
}

impl Exp4Learner {
    pub fn new(class: Arc<PolicyClass>, horizon: usize, gamma: f64, learning_rate: f64, seed: u64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(input_err!("learning rate {learning_rate} must be finite and nonnegative"));
        }
        let n = class.len();
        Ok(Self {
            class,
            gamma,
            learning_rate,
            horizon,
            log_weights: vec![0.0; n],
            t: 0,
            action_rng: stream(seed, Stream::Action),
            estimator_rng: stream(seed, Stream::Estimator),
        })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `(1 - gamma) * weighted policy vote at x + gamma / K`.
    pub fn distribution(&self, context: Context) -> Result<ActionDistribution> {
        self.class.check_context(context)?;
        let k = self.class.num_actions();
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut vote = vec![0.0; k];
        let mut total = 0.0;
        for (lw, policy) in self.log_weights.iter().zip(self.class.policies()) {
            let w = (lw - max).exp();
            vote[policy.act(context)] += w;
            total += w;
        }
        validate_distribution(vote.iter().map(|v| (1.0 - self.gamma) * v / total + self.gamma / k as f64).collect())
    }
}

impl Learner for Exp4Learner {
    fn num_actions(&self) -> usize {
        self.class.num_actions()
    }

    fn play_round(
        &mut self,
        context: Context,
        feedback: &mut dyn FnMut(&ActionDistribution) -> Result<CostVector>,
    ) -> Result<RoundRecord> {
        self.t += 1;
        if self.t > self.horizon {
            return Err(input_err!("round {} beyond horizon {}", self.t, self.horizon));
        }
        let k = self.class.num_actions();
        let q = self.distribution(context)?;
        let (costs, action, observed) = observe(&q, &q, feedback, &mut self.action_rng)?;
        let estimate = estimate_cost(observed, action, &q, self.gamma, k, &mut self.estimator_rng)?;
        if !estimate.is_zero() {
            for (lw, policy) in self.log_weights.iter_mut().zip(self.class.policies()) {
                *lw -= self.learning_rate * estimate.value_at(policy.act(context));
            }
            let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            self.log_weights.iter_mut().for_each(|lw| *lw -= max);
        }
        Ok(RoundRecord { t: self.t, context, q, action, observed_cost: observed, estimate, oracle_calls: 0, costs })
    }
}
