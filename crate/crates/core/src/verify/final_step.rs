use rand::Rng;

use crate::error::{config_err, input_err, Result};
use crate::estimator::{estimate_cost, spike_distribution};
use crate::learner::{Learner, RelaxLearner};
use crate::oracle::{best_fixed_policy_cost, ExhaustiveOracle};
use crate::relaxation::{relaxation_random_value, Hallucination};
use crate::stats::RunningStats;
use crate::types::{ActionDistribution, Context, CostVector, EstimatedCost, Rollout};

use super::{CheckReport, Instance, Mode, MAX_EXACT_ATOMS};

/// The `q_1..q_T` the relaxation learner plays against a fixed sequence.
pub fn relax_distributions(instance: &Instance, contexts: &[Context], costs: &[CostVector], seed: u64) -> Result<Vec<ActionDistribution>> {
    if contexts.len() != instance.horizon || costs.len() != instance.horizon {
        return Err(input_err!("need {} contexts and cost vectors", instance.horizon));
    }
    let mut learner = RelaxLearner::new(
        instance.class.clone(),
        instance.contexts.clone(),
        instance.horizon,
        instance.gamma,
        Hallucination::OneHot,
        seed,
    )?;
    contexts
        .iter()
        .zip(costs)
        .map(|(x, c)| Ok(learner.play_round(*x, &mut |_| Ok(c.clone()))?.q))
        .collect()
}

/// Checks `E[Rel(I_{1..T})] >= -min_pi sum_t c_t(pi(x_t))` for fixed
/// contexts, costs and distributions, where the expectation runs over the
/// learner's actions and the estimator coins.
///
/// Each estimate is drawn from its own `q_t`, so the `T` estimates are
/// independent. Exact mode enumerates the `(K + 1)^T` estimate sequences.
#[allow(clippy::too_many_arguments)]
pub fn check_final_condition<R: Rng + ?Sized>(
    instance: &Instance,
    contexts: &[Context],
    costs: &[CostVector],
    distributions: &[ActionDistribution],
    mode: Mode,
    n_samples: u64,
    rng: &mut R,
) -> Result<CheckReport> {
    let horizon = instance.horizon;
    let k = instance.num_actions();
    let gamma = instance.gamma;
    if contexts.len() != horizon || costs.len() != horizon || distributions.len() != horizon {
        return Err(input_err!("final-step check needs exactly T = {horizon} contexts, costs and distributions"));
    }
    for x in contexts {
        instance.class.check_context(*x)?;
    }
    let benchmark = best_fixed_policy_cost(contexts, costs, &instance.class)?.value;
    // Law of each c_hat_t: index 0 is Zero, index 1 + i a spike on i.
    let laws: Vec<Vec<f64>> = costs
        .iter()
        .zip(distributions)
        .map(|(c, q)| {
            let spikes = spike_distribution(c.as_slice(), q, gamma)?;
            let mut law = vec![1.0 - spikes.iter().sum::<f64>()];
            law.extend(spikes);
            Ok(law)
        })
        .collect::<Result<_>>()?;
    let atoms = ((k + 1) as u64).checked_pow(horizon as u32);
    let small = atoms.is_some_and(|n| n <= MAX_EXACT_ATOMS);
    let exact = match mode {
        Mode::Auto => small,
        Mode::MonteCarlo => false,
        Mode::Exact if small => true,
        Mode::Exact => return Err(config_err!("(K + 1)^T exceeds {MAX_EXACT_ATOMS} atoms")),
    };
    let mut oracle = ExhaustiveOracle::new(instance.class.clone());
    let empty = Rollout::empty(horizon);
    let mut history: Vec<(Context, EstimatedCost)> = contexts.iter().map(|x| (*x, EstimatedCost::Zero)).collect();
    let spike = |j: usize| if j == 0 { Ok(EstimatedCost::Zero) } else { EstimatedCost::spike(j - 1, k, gamma) };

    let report = if exact {
        let mut index = vec![0usize; horizon];
        let mut lhs = 0.0;
        'outer: loop {
            let mut prob = 1.0;
            for (t, j) in index.iter().enumerate() {
                prob *= laws[t][*j];
                history[t].1 = spike(*j)?;
            }
            if prob > 0.0 {
                lhs += prob * relaxation_random_value(&history, &empty, horizon, horizon, gamma, &mut oracle)?;
            }
            for digit in index.iter_mut() {
                *digit += 1;
                if *digit <= k {
                    continue 'outer;
                }
                *digit = 0;
            }
            break;
        }
        CheckReport::lower("final-step", lhs, -benchmark, 0.0, 0).with_detail("exact")
    } else {
        if n_samples == 0 {
            return Err(config_err!("Monte-Carlo final-step check needs n_samples >= 1"));
        }
        let mut stats = RunningStats::new();
        for _ in 0..n_samples {
            for t in 0..horizon {
                let q = &distributions[t];
                let y = q.sample(rng);
                history[t].1 = estimate_cost(costs[t].get(y), y, q, gamma, k, rng)?;
            }
            stats.push(relaxation_random_value(&history, &empty, horizon, horizon, gamma, &mut oracle)?);
        }
        CheckReport::lower("final-step", stats.mean(), -benchmark, stats.std_error(), stats.count()).with_detail("monte-carlo")
    };
    Ok(report)
}
