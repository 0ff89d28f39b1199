//! Hallucinated futures and the random component of the relaxation.
//!
//! At round `t` the learner draws one rollout `rho_t` of `T - t` steps. Each
//! step carries a context from `D`, a Rademacher vector and a scale
//! `Z in {0, K/gamma}` with `Pr[Z = K/gamma] = gamma`. The shipped learner
//! uses one-hot vectors; the dense variant puts an independent sign on every
//! arm and exists for comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::ContextDistribution;
use crate::error::{input_err, Result};
use crate::oracle::{ErmOracle, ErmQuery};
use crate::types::{check_gamma, spike_height, Context, EstimatedCost, HallucinationStep, Noise, Rollout, Sign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hallucination {
    #[default]
    OneHot,
    Dense,
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> Sign {
    if rng.random::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Draws `rho_t` for round `t` of `horizon`.
///
/// Per step the draw order is: context, arm (one-hot) or `K` signs (dense),
/// sign (one-hot), then the scale coin.
pub fn sample_rollout_with<R: Rng + ?Sized>(
    kind: Hallucination,
    t: usize,
    horizon: usize,
    num_actions: usize,
    gamma: f64,
    contexts: &ContextDistribution,
    rng: &mut R,
) -> Result<Rollout> {
    if t == 0 {
        return Err(input_err!("round {t} outside 1..={horizon}"));
    }
    draw_future(kind, t, horizon, num_actions, gamma, contexts, rng)
}

/// Like [`sample_rollout_with`] but also accepts `t = 0`, the full-horizon
/// future behind the relaxation's initial value.
pub fn draw_future<R: Rng + ?Sized>(
    kind: Hallucination,
    t: usize,
    horizon: usize,
    num_actions: usize,
    gamma: f64,
    contexts: &ContextDistribution,
    rng: &mut R,
) -> Result<Rollout> {
    check_gamma(gamma)?;
    if t > horizon {
        return Err(input_err!("round {t} beyond horizon {horizon}"));
    }
    if num_actions == 0 {
        return Err(input_err!("need at least one action"));
    }
    let scale = spike_height(num_actions, gamma);
    let steps = (t..horizon)
        .map(|_| {
            let context = contexts.sample(rng);
            let noise = match kind {
                Hallucination::OneHot => {
                    let arm = rng.random_range(0..num_actions);
                    Noise::OneHot { arm, sign: random_sign(rng) }
                }
                Hallucination::Dense => Noise::Dense((0..num_actions).map(|_| random_sign(rng)).collect()),
            };
            let z = if rng.random::<f64>() < gamma { scale } else { 0.0 };
            HallucinationStep::from_parts(context, noise, z)
        })
        .collect();
    Rollout::new(t, horizon, steps)
}

/// Equal in law to [`sample_rollout_with`] for everything the relaxation
/// reads. A step with `Z = 0` contributes nothing to any policy's sum, so
/// only the `Z = K/gamma` steps are drawn, at geometric gaps, and the others
/// are inert placeholders. Costs `O(gamma (T - t))` random draws instead of
/// `O(T - t)`; the draw order differs, so streams are not interchangeable.
pub fn sample_sparse_rollout<R: Rng + ?Sized>(
    kind: Hallucination,
    t: usize,
    horizon: usize,
    num_actions: usize,
    gamma: f64,
    contexts: &ContextDistribution,
    rng: &mut R,
) -> Result<Rollout> {
    check_gamma(gamma)?;
    if t == 0 || t > horizon {
        return Err(input_err!("round {t} outside 1..={horizon}"));
    }
    let scale = spike_height(num_actions, gamma);
    let inert = HallucinationStep::from_parts(Context::unchecked(0), Noise::OneHot { arm: 0, sign: Sign::Plus }, 0.0);
    let len = horizon - t;
    let mut steps = vec![inert; len];
    let log_miss = (1.0 - gamma).ln();
    let mut next = 0usize;
    loop {
        if gamma < 1.0 {
            // Failures before the next success of a Bernoulli(gamma) sequence.
            let u = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / log_miss).floor();
            if gap >= (len - next) as f64 {
                break;
            }
            next += gap as usize;
        }
        if next >= len {
            break;
        }
        let context = contexts.sample(rng);
        let noise = match kind {
            Hallucination::OneHot => {
                let arm = rng.random_range(0..num_actions);
                Noise::OneHot { arm, sign: random_sign(rng) }
            }
            Hallucination::Dense => Noise::Dense((0..num_actions).map(|_| random_sign(rng)).collect()),
        };
        steps[next] = HallucinationStep::from_parts(context, noise, scale);
        next += 1;
    }
    Rollout::new(t, horizon, steps)
}

/// One-hot rollout, the one the relaxation learner uses.
pub fn sample_rollout<R: Rng + ?Sized>(
    t: usize,
    horizon: usize,
    num_actions: usize,
    gamma: f64,
    contexts: &ContextDistribution,
    rng: &mut R,
) -> Result<Rollout> {
    sample_rollout_with(Hallucination::OneHot, t, horizon, num_actions, gamma, contexts, rng)
}

/// `R((x, c_hat)_{1..t}, rho_t) = gamma (T - t) - min_pi [past + future]`.
///
/// One oracle call. The relaxation itself is the mean of this over `rho_t`;
/// see `verify::estimate_rel`.
pub fn relaxation_random_value(
    history: &[(Context, EstimatedCost)],
    rollout: &Rollout,
    t: usize,
    horizon: usize,
    gamma: f64,
    oracle: &mut dyn ErmOracle,
) -> Result<f64> {
    if history.len() != t {
        return Err(input_err!("history has {} rounds, expected t = {t}", history.len()));
    }
    if t > horizon || rollout.len() != horizon - t {
        return Err(input_err!("rollout of {} steps does not cover rounds {}..={horizon}", rollout.len(), t + 1));
    }
    let inf = oracle.value_of_erm(&ErmQuery::new(history, rollout.steps()))?.value;
    Ok(gamma * (horizon - t) as f64 - inf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ExhaustiveOracle;
    use crate::rng::{stream, Stream};
    use crate::types::PolicyClass;
    use std::sync::Arc;

    #[test]
    fn last_round_has_empty_rollout() {
        let d = ContextDistribution::uniform(2).unwrap();
        let mut rng = stream(0, Stream::Rollout);
        assert!(sample_rollout(5, 5, 3, 0.4, &d, &mut rng).unwrap().is_empty());
        assert!(sample_rollout(6, 5, 3, 0.4, &d, &mut rng).is_err());
    }

    #[test]
    fn gamma_one_makes_every_scale_k() {
        let d = ContextDistribution::uniform(3).unwrap();
        let mut rng = stream(4, Stream::Rollout);
        let r = sample_rollout(1, 200, 3, 1.0, &d, &mut rng).unwrap();
        assert!(r.steps().iter().all(|s| s.z() == 3.0));
    }

    #[test]
    fn final_round_value_is_negated_erm() {
        let class = Arc::new(PolicyClass::exhaustive(2, 2).unwrap());
        let mut oracle = ExhaustiveOracle::new(class);
        let x = Context::new(0, 2).unwrap();
        let zeros = vec![(x, EstimatedCost::Zero); 3];
        let r = Rollout::empty(3);
        assert_eq!(relaxation_random_value(&zeros, &r, 3, 3, 0.5, &mut oracle).unwrap(), 0.0);
        let spiked = vec![(x, EstimatedCost::spike(0, 2, 0.5).unwrap()), (x, EstimatedCost::spike(1, 2, 0.5).unwrap()), (x, EstimatedCost::Zero)];
        // Every policy pays one spike of 4 at x = 0.
        assert_eq!(relaxation_random_value(&spiked, &r, 3, 3, 0.5, &mut oracle).unwrap(), -4.0);
        assert_eq!(oracle.calls(), 2);
    }

    #[test]
    fn zero_scale_future_leaves_only_the_constant() {
        let class = Arc::new(PolicyClass::exhaustive(2, 2).unwrap());
        let mut oracle = ExhaustiveOracle::new(class);
        let x = Context::new(1, 2).unwrap();
        let steps = (0..4)
            .map(|i| HallucinationStep::new(x, Noise::OneHot { arm: i % 2, sign: Sign::Minus }, 0.0, 2, 0.25).unwrap())
            .collect();
        let r = Rollout::new(0, 4, steps).unwrap();
        assert_eq!(relaxation_random_value(&[], &r, 0, 4, 0.25, &mut oracle).unwrap(), 1.0);
    }

    #[test]
    fn sparse_rollouts_match_the_step_law() {
        let d = ContextDistribution::new(vec![0.25, 0.75]).unwrap();
        let (gamma, n) = (0.2, 200_000usize);
        let mut rng = stream(9, Stream::Rollout);
        let r = sample_sparse_rollout(Hallucination::OneHot, 1, n + 1, 3, gamma, &d, &mut rng).unwrap();
        let live: Vec<_> = r.steps().iter().filter(|s| s.z() != 0.0).collect();
        let se = (gamma * (1.0 - gamma) / n as f64).sqrt();
        assert!((live.len() as f64 / n as f64 - gamma).abs() < 4.0 * se);
        assert!(live.iter().all(|s| s.z() == 15.0));
        let m = live.len() as f64;
        let ctx1 = live.iter().filter(|s| s.context().id() == 1).count() as f64 / m;
        assert!((ctx1 - 0.75).abs() < 4.0 * (0.1875 / m).sqrt());
        let arm2 = live.iter().filter(|s| matches!(s.noise(), Noise::OneHot { arm: 2, .. })).count() as f64 / m;
        assert!((arm2 - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / m).sqrt());
        let plus = live.iter().filter(|s| matches!(s.noise(), Noise::OneHot { sign: Sign::Plus, .. })).count() as f64 / m;
        assert!((plus - 0.5).abs() < 4.0 * (0.25 / m).sqrt());
        // Gaps between live steps are memoryless: about gamma of the steps
        // right after a live one are live again.
        let after: Vec<bool> = r.steps().windows(2).filter(|w| w[0].z() != 0.0).map(|w| w[1].z() != 0.0).collect();
        let rate = after.iter().filter(|b| **b).count() as f64 / after.len() as f64;
        assert!((rate - gamma).abs() < 4.0 * (gamma * (1.0 - gamma) / after.len() as f64).sqrt());

        let all = sample_sparse_rollout(Hallucination::Dense, 3, 10, 2, 1.0, &d, &mut rng).unwrap();
        assert_eq!(all.len(), 7);
        assert!(all.steps().iter().all(|s| s.z() == 2.0 && matches!(s.noise(), Noise::Dense(v) if v.len() == 2)));
        assert!(sample_sparse_rollout(Hallucination::OneHot, 4, 4, 2, 0.5, &d, &mut rng).unwrap().is_empty());
        assert!(sample_sparse_rollout(Hallucination::OneHot, 0, 4, 2, 0.5, &d, &mut rng).is_err());
    }

    #[test]
    fn history_length_must_match_round() {
        let class = Arc::new(PolicyClass::exhaustive(1, 2).unwrap());
        let mut oracle = ExhaustiveOracle::new(class);
        assert!(relaxation_random_value(&[], &Rollout::empty(2), 2, 2, 0.5, &mut oracle).is_err());
    }
}
