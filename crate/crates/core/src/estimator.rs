//! Discretized inverse-propensity cost estimate.
//!
//! From the single observed loss `c_t(y_t)` the learner forms `c_hat_t`,
//! which is `K/gamma * e_{y_t}` with probability
//! `gamma * c_t(y_t) / (K * q_t(y_t))` and zero otherwise. Averaged over
//! `y_t ~ q_t` and the coin this is exactly `c_t`. The coin probability is at
//! most one only while `q_t` keeps the exploration floor `gamma / K`, which
//! is therefore checked on every call.

use rand::Rng;

use crate::error::{input_err, Result};
use crate::types::{check_gamma, ActionDistribution, EstimatedCost};

/// Probability that the estimate is a spike, given the chosen action.
pub fn spike_probability(observed: f64, chosen: usize, q: &ActionDistribution, gamma: f64, num_actions: usize) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&observed) {
        return Err(input_err!("observed cost {observed} outside [0, 1]"));
    }
    if q.len() != num_actions || chosen >= num_actions {
        return Err(input_err!("action {chosen} / distribution of length {} inconsistent with K = {num_actions}", q.len()));
    }
    q.check_floor(gamma)?;
    Ok(gamma * observed / (num_actions as f64 * q.prob(chosen)))
}

/// Draws `c_hat_t`. Always consumes exactly one uniform from `rng`.
pub fn estimate_cost<R: Rng + ?Sized>(
    observed: f64,
    chosen: usize,
    q: &ActionDistribution,
    gamma: f64,
    num_actions: usize,
    rng: &mut R,
) -> Result<EstimatedCost> {
    let p = spike_probability(observed, chosen, q, gamma, num_actions)?;
    let coin: f64 = rng.random();
    if coin < p {
        EstimatedCost::spike(chosen, num_actions, gamma)
    } else {
        Ok(EstimatedCost::Zero)
    }
}

/// Marginal law of `c_hat_t` before `y_t` is drawn: entry `i` is
/// `Pr[c_hat_t = K/gamma * e_i]`; the remaining mass sits on zero.
pub fn spike_distribution(costs: &[f64], q: &ActionDistribution, gamma: f64) -> Result<Vec<f64>> {
    let k = q.len();
    costs
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(q.prob(i) * spike_probability(*c, i, q, gamma, k)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::types::validate_distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_observation_never_spikes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = ActionDistribution::uniform(3);
        for _ in 0..1000 {
            assert_eq!(estimate_cost(0.0, 1, &q, 0.4, 3, &mut rng).unwrap(), EstimatedCost::Zero);
        }
    }

    #[test]
    fn uniform_unit_cost_spikes_with_probability_gamma() {
        let q = ActionDistribution::uniform(4);
        assert!((spike_probability(1.0, 2, &q, 0.3, 4).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn floor_violation_is_a_contract_error() {
        let q = validate_distribution(vec![0.99, 0.01]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = estimate_cost(0.5, 0, &q, 0.5, 2, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn observed_out_of_range_is_input_error() {
        let q = ActionDistribution::uniform(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(estimate_cost(1.5, 0, &q, 0.5, 2, &mut rng), Err(Error::Input(_))));
    }

    #[test]
    fn spikes_have_exact_height_and_capped_mass() {
        let q = validate_distribution(vec![0.5, 0.3, 0.2]).unwrap();
        let law = spike_distribution(&[0.6, 0.2, 0.9], &q, 0.3).unwrap();
        for p in &law {
            assert!(*p <= 0.3 / 3.0 + 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let e = estimate_cost(1.0, 2, &q, 0.3, 3, &mut rng).unwrap();
            assert!(e.matches_scale(3, 0.3));
        }
    }
}
