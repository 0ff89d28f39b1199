use std::sync::Arc;

use rayon::prelude::*;

use crate::envs::{AdversarySpec, ContextDistribution};
use crate::error::{config_err, input_err, Result};
use crate::learner::{run_episode, EnvSpec, LearnerSpec};
use crate::relaxation::{draw_future, Hallucination};
use crate::rng::{derive_seeds, substream};
use crate::stats::RunningStats;
use crate::types::{check_gamma, PolicyClass};

use super::CheckReport;

/// Samples per parallel Monte-Carlo batch.
const BATCH: u64 = 1_000;

/// `2 sqrt(K T ln|Pi| / gamma)`.
pub fn rademacher_bound(horizon: usize, num_actions: usize, class_size: usize, gamma: f64) -> f64 {
    2.0 * (num_actions as f64 * horizon as f64 * (class_size as f64).ln() / gamma).sqrt()
}

/// `4 sqrt(T K ln|Pi| / gamma) + gamma T`.
pub fn regret_bound(horizon: usize, num_actions: usize, class_size: usize, gamma: f64) -> f64 {
    4.0 * (horizon as f64 * num_actions as f64 * (class_size as f64).ln() / gamma).sqrt() + gamma * horizon as f64
}

fn check_hypothesis(horizon: usize, num_actions: usize, class_size: usize, gamma: f64) -> Result<()> {
    check_gamma(gamma).map_err(|e| config_err!("{e}"))?;
    let floor = num_actions as f64 * (class_size as f64).ln() / (2.0 * horizon as f64);
    if gamma <= floor {
        return Err(config_err!(
            "Rademacher-average bound hypothesis violated: need gamma > K ln|Pi| / (2T) = {floor:.6}, got gamma = {gamma}"
        ));
    }
    Ok(())
}

/// Monte-Carlo check of
/// `E sup_pi sum_t Z_t eps_t(pi(x_t)) <= 2 sqrt(K T ln|Pi| / gamma)`.
///
/// Batches of [`BATCH`] draws run in parallel on independent substreams of
/// `seed` and are pooled in batch order, so the result does not depend on
/// the thread count.
pub fn check_rademacher_bound(
    class: &PolicyClass,
    contexts: &ContextDistribution,
    horizon: usize,
    gamma: f64,
    n_samples: u64,
    seed: u64,
) -> Result<CheckReport> {
    let k = class.num_actions();
    check_hypothesis(horizon, k, class.len(), gamma)?;
    if n_samples == 0 {
        return Err(config_err!("Rademacher check needs n_samples >= 1"));
    }
    if contexts.num_contexts() != class.num_contexts() {
        return Err(input_err!("context distribution does not match the policy class"));
    }
    let batches = n_samples.div_ceil(BATCH);
    let pooled = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let mut stats = RunningStats::new();
            let mut totals = vec![0.0; class.len()];
            for _ in 0..BATCH.min(n_samples - b * BATCH) {
                let draw = draw_future(Hallucination::OneHot, 0, horizon, k, gamma, contexts, &mut rng)?;
                totals.iter_mut().for_each(|v| *v = 0.0);
                for step in draw.steps().iter().filter(|s| s.z() != 0.0) {
                    for (acc, policy) in totals.iter_mut().zip(class.policies()) {
                        *acc += step.z() * step.epsilon(policy.act(step.context()));
                    }
                }
                stats.push(totals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(RunningStats::new(), |mut acc, s| {
            acc.merge(&s);
            acc
        });
    let bound = rademacher_bound(horizon, k, class.len(), gamma);
    Ok(CheckReport::upper(
        format!("rademacher K={k} T={horizon} gamma={gamma} |Pi|={}", class.len()),
        pooled.mean(),
        bound,
        pooled.std_error(),
        pooled.count(),
    ))
}

/// Mean expected regret of the relaxation learner over `n_seeds` runs per
/// adversary, each checked against `4 sqrt(T K ln|Pi| / gamma) + gamma T`.
pub fn check_regret_bound(
    class: Arc<PolicyClass>,
    contexts: &ContextDistribution,
    horizon: usize,
    gamma: f64,
    adversaries: &[(String, AdversarySpec)],
    n_seeds: usize,
    master_seed: u64,
) -> Result<Vec<CheckReport>> {
    let k = class.num_actions();
    let floor = k as f64 * (class.len() as f64).ln() / (2.0 * horizon as f64);
    if !(gamma > floor && gamma <= 1.0) {
        return Err(config_err!("regret bound needs gamma in (K ln|Pi| / (2T), 1] = ({floor:.6}, 1], got {gamma}"));
    }
    if n_seeds < 2 {
        return Err(config_err!("regret check needs at least two seeds for a standard error"));
    }
    let learner = LearnerSpec::Relax { gamma: Some(gamma) };
    let seeds = derive_seeds(master_seed, n_seeds);
    let bound = regret_bound(horizon, k, class.len(), gamma);
    adversaries
        .iter()
        .map(|(name, spec)| {
            let env = EnvSpec { contexts: contexts.clone(), adversary: spec.clone() };
            let regrets = seeds
                .par_iter()
                .map(|seed| Ok(run_episode(&learner, &env, class.clone(), horizon, *seed)?.report.expected_regret))
                .collect::<Result<Vec<f64>>>()?;
            let stats: RunningStats = regrets.into_iter().collect();
            Ok(CheckReport::upper(format!("regret {name} T={horizon}"), stats.mean(), bound, stats.std_error(), stats.count()))
        })
        .collect()
}
