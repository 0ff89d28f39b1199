//! The per-round strategy: `K + 1` oracle values, water-filling, exploration.
//!
//! With `psi_0` the ERM value of the past plus the rollout, and `psi_i` the
//! same with an extra `K/gamma` spike on action `i - 1` at `x_t`, the
//! minimax distribution `q*_t` minimizes `sum_i (q(i) - eta_i)^+` over the
//! simplex, where `eta_i = gamma (psi_i - psi_0) / K`. Water-filling solves
//! that in closed form, and `q_t` mixes in `gamma / K` uniform exploration.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::oracle::{ErmOracle, ErmQuery, SpikeOverride};
use crate::types::{check_gamma, spike_height, validate_distribution, validate_without_rescaling, ActionDistribution, Context, EstimatedCost, Rollout};

/// `[psi_0, psi_1, .., psi_K]`; index 0 is the no-spike baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiVector(Vec<f64>);

impl PsiVector {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.len() < 2 {
            return Err(input_err!("psi needs a baseline and at least one action, got {} entries", psi.len()));
        }
        Ok(Self(psi))
    }

    pub fn baseline(&self) -> f64 {
        self.0[0]
    }

    /// `psi_{i+1}`, the value with the spike on action `i`.
    pub fn spiked(&self, action: usize) -> f64 {
        self.0[action + 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_actions(&self) -> usize {
        self.0.len() - 1
    }
}

/// Computes `psi` with exactly `K + 1` oracle calls.
///
/// `history` holds rounds `1..t-1`; `rollout` covers `t+1..T`.
pub fn compute_psi(
    history: &[(Context, EstimatedCost)],
    rollout: &Rollout,
    context: Context,
    gamma: f64,
    num_actions: usize,
    oracle: &mut dyn ErmOracle,
) -> Result<PsiVector> {
    check_gamma(gamma)?;
    let t = history.len() + 1;
    if rollout.len() + t != rollout.horizon() {
        return Err(input_err!(
            "rollout of {} steps does not follow a history of {} rounds (T = {})",
            rollout.len(),
            history.len(),
            rollout.horizon()
        ));
    }
    let height = spike_height(num_actions, gamma);
    let base = ErmQuery::new(history, rollout.steps()).with_current(context, None);
    let mut psi = Vec::with_capacity(num_actions + 1);
    psi.push(oracle.value_of_erm(&base)?.value);
    for action in 0..num_actions {
        let query = base.with_current(context, Some(SpikeOverride { action, value: height }));
        psi.push(oracle.value_of_erm(&query)?.value);
    }
    PsiVector::new(psi)
}

/// `eta_i = gamma (psi_i - psi_0) / K`.
pub fn eta_from_psi(psi: &PsiVector, gamma: f64, num_actions: usize) -> Vec<f64> {
    let base = psi.baseline();
    (0..psi.num_actions())
        .map(|i| gamma * (psi.spiked(i) - base) / num_actions as f64)
        .collect()
}

/// Water-filling: in ascending index order give action `i` up to
/// `max(eta_i, 0)` of the remaining mass, then spread any leftover evenly over
/// all `K` actions.
pub fn water_fill(eta: &[f64]) -> Result<ActionDistribution> {
    if eta.is_empty() {
        return Err(input_err!("water-filling needs at least one action"));
    }
    let mut remaining = 1.0;
    let mut q: Vec<f64> = eta
        .iter()
        .map(|e| {
            let take = e.max(0.0).min(remaining);
            remaining -= take;
            take
        })
        .collect();
    if remaining > 0.0 {
        let share = remaining / eta.len() as f64;
        q.iter_mut().for_each(|p| *p += share);
    }
    // Rescaling could lift a capped q(i) one ulp above eta_i.
    validate_without_rescaling(q)
}

/// `q_t = (1 - gamma) q* + (gamma / K) 1`.
pub fn mix_exploration(q_star: &ActionDistribution, gamma: f64) -> Result<ActionDistribution> {
    check_gamma(gamma)?;
    let k = q_star.len() as f64;
    validate_distribution(q_star.probs().iter().map(|p| (1.0 - gamma) * p + gamma / k).collect())
}

/// Output of one strategy computation.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub psi: PsiVector,
    pub q_star: ActionDistribution,
    pub q: ActionDistribution,
}

/// The full pipeline `compute_psi -> eta -> water_fill -> mix`.
pub fn relaxation_strategy(
    history: &[(Context, EstimatedCost)],
    rollout: &Rollout,
    context: Context,
    gamma: f64,
    num_actions: usize,
    oracle: &mut dyn ErmOracle,
) -> Result<Strategy> {
    let psi = compute_psi(history, rollout, context, gamma, num_actions, oracle)?;
    let q_star = water_fill(&eta_from_psi(&psi, gamma, num_actions))?;
    let q = mix_exploration(&q_star, gamma)?;
    Ok(Strategy { psi, q_star, q })
}

/// `sum_i (q(i) - eta_i)^+`, the objective water-filling minimizes.
pub fn water_fill_objective(q: &[f64], eta: &[f64]) -> f64 {
    q.iter().zip(eta).map(|(p, e)| (p - e).max(0.0)).sum()
}
