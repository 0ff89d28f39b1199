//! Value-of-ERM oracle.
//!
//! A query mixes three kinds of terms: real past estimates `c_hat_tau`, an
//! optional spike injected at the current context, and hallucinated future
//! terms `2 Z_tau epsilon_tau`. The oracle returns the minimum cumulative cost
//! over the policy class together with the lowest-index minimizer.

use std::sync::Arc;

use crate::error::{input_err, Error, Result};
use crate::types::{Context, CostVector, EstimatedCost, HallucinationStep, PolicyClass};

/// A spike of height `value` on `action`, placed at the query's current context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeOverride {
    pub action: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ErmQuery<'a> {
    pub past: &'a [(Context, EstimatedCost)],
    pub current_context: Option<Context>,
    pub spike_override: Option<SpikeOverride>,
    pub future: &'a [HallucinationStep],
}

impl<'a> ErmQuery<'a> {
    pub fn new(past: &'a [(Context, EstimatedCost)], future: &'a [HallucinationStep]) -> Self {
        Self { past, current_context: None, spike_override: None, future }
    }

    pub fn with_current(mut self, context: Context, spike: Option<SpikeOverride>) -> Self {
        self.current_context = Some(context);
        self.spike_override = spike;
        self
    }

    /// Checks everything but the contexts of `past` and `future`, which the
    /// oracle checks as it folds them into its sums.
    fn validate_current(&self, class: &PolicyClass) -> Result<()> {
        if self.spike_override.is_some() && self.current_context.is_none() {
            return Err(input_err!("spike override given without a current context"));
        }
        if let Some(s) = self.spike_override {
            if s.action >= class.num_actions() {
                return Err(input_err!("spike action {} outside 0..{}", s.action, class.num_actions()));
            }
        }
        if let Some(x) = self.current_context {
            class.check_context(x)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErmAnswer {
    pub value: f64,
    pub argmin_policy: usize,
}

/// Anything that can answer value-of-ERM queries over a fixed class.
///
/// Implementations count every call to [`ErmOracle::value_of_erm`].
pub trait ErmOracle {
    fn value_of_erm(&mut self, query: &ErmQuery<'_>) -> Result<ErmAnswer>;

    /// Total queries answered so far.
    fn calls(&self) -> u64;

    fn class(&self) -> &PolicyClass;
}

/// Exhaustive oracle: evaluates every policy.
///
/// Two caches make a round cheap: the running per-policy sum of past
/// estimates (extended when a query's past grows the cached prefix) and the
/// per-policy future sum of the last rollout seen (shared by the `K + 1`
/// queries of one round). Both are rebuilt from scratch on a mismatch.
#[derive(Clone, Debug)]
pub struct ExhaustiveOracle {
    class: Arc<PolicyClass>,
    caching: bool,
    calls: u64,
    past_key: Vec<(Context, EstimatedCost)>,
    past_sums: Vec<f64>,
    future_key: Vec<HallucinationStep>,
    future_sums: Vec<f64>,
}

impl ExhaustiveOracle {
    pub fn new(class: Arc<PolicyClass>) -> Self {
        let n = class.len();
        Self {
            class,
            caching: true,
            calls: 0,
            past_key: Vec::new(),
            past_sums: vec![0.0; n],
            future_key: Vec::new(),
            future_sums: vec![0.0; n],
        }
    }

    /// An oracle that recomputes every sum from scratch on each query.
    pub fn uncached(class: Arc<PolicyClass>) -> Self {
        Self { caching: false, ..Self::new(class) }
    }

    fn refresh_past(&mut self, past: &[(Context, EstimatedCost)]) -> Result<()> {
        let cached = self.past_key.len();
        let extends = self.caching && cached <= past.len() && self.past_key[..] == past[..cached];
        let fresh = if extends { &past[cached..] } else { past };
        for (x, _) in fresh {
            self.class.check_context(*x)?;
        }
        if !extends {
            self.past_sums.iter_mut().for_each(|s| *s = 0.0);
            self.past_key.clear();
        }
        for (sum, policy) in self.past_sums.iter_mut().zip(self.class.policies()) {
            for (x, c) in fresh {
                *sum += c.value_at(policy.act(*x));
            }
        }
        self.past_key.extend_from_slice(fresh);
        Ok(())
    }

    fn refresh_future(&mut self, future: &[HallucinationStep]) -> Result<()> {
        if self.caching && self.future_key[..] == future[..] {
            return Ok(());
        }
        for step in future {
            self.class.check_context(step.context())?;
        }
        self.future_sums.iter_mut().for_each(|s| *s = 0.0);
        for step in future.iter().filter(|s| s.z() != 0.0) {
            for (sum, policy) in self.future_sums.iter_mut().zip(self.class.policies()) {
                *sum += step.term(policy.act(step.context()));
            }
        }
        self.future_key.clear();
        self.future_key.extend_from_slice(future);
        Ok(())
    }
}

impl ErmOracle for ExhaustiveOracle {
    fn value_of_erm(&mut self, query: &ErmQuery<'_>) -> Result<ErmAnswer> {
        query.validate_current(&self.class)?;
        self.refresh_past(query.past)?;
        self.refresh_future(query.future)?;
        self.calls += 1;

        let mut best = ErmAnswer { value: f64::INFINITY, argmin_policy: 0 };
        for (i, policy) in self.class.policies().iter().enumerate() {
            let spike = match (query.current_context, query.spike_override) {
                (Some(x), Some(s)) if policy.act(x) == s.action => s.value,
                _ => 0.0,
            };
            let total = self.past_sums[i] + spike + self.future_sums[i];
            if total < best.value {
                best = ErmAnswer { value: total, argmin_policy: i };
            }
        }
        Ok(best)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn class(&self) -> &PolicyClass {
        &self.class
    }
}

/// The plain value-of-ERM over arbitrary real cost rows `(x, c)_{1..n}`.
pub fn erm_over_costs(class: &PolicyClass, rows: &[(Context, &[f64])]) -> Result<ErmAnswer> {
    for (x, c) in rows {
        class.check_context(*x)?;
        if c.len() != class.num_actions() {
            return Err(input_err!("cost row has {} entries, expected {}", c.len(), class.num_actions()));
        }
    }
    let mut best = ErmAnswer { value: f64::INFINITY, argmin_policy: 0 };
    for (i, policy) in class.policies().iter().enumerate() {
        let total: f64 = rows.iter().map(|(x, c)| c[policy.act(*x)]).sum();
        if total < best.value {
            best = ErmAnswer { value: total, argmin_policy: i };
        }
    }
    Ok(best)
}

/// `min_pi sum_t c_t(pi(x_t))`, the regret benchmark, with its lowest-index minimizer.
pub fn best_fixed_policy_cost(
    contexts: &[Context],
    true_costs: &[CostVector],
    class: &PolicyClass,
) -> Result<ErmAnswer> {
    if contexts.len() != true_costs.len() {
        return Err(input_err!(
            "{} contexts but {} cost vectors",
            contexts.len(),
            true_costs.len()
        ));
    }
    if class.is_empty() {
        return Err(Error::Config("empty policy class".into()));
    }
    let rows: Vec<(Context, &[f64])> = contexts.iter().copied().zip(true_costs.iter().map(CostVector::as_slice)).collect();
    erm_over_costs(class, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Noise, Sign};

    fn two_constant_policies() -> Arc<PolicyClass> {
        Arc::new(PolicyClass::from_tables(vec![vec![0, 0], vec![1, 1]], 2).unwrap())
    }

    fn ctx(id: usize) -> Context {
        Context::new(id, 2).unwrap()
    }

    #[test]
    fn spike_avoided_by_second_policy() {
        let mut oracle = ExhaustiveOracle::new(two_constant_policies());
        let past = [(ctx(0), EstimatedCost::Spike { action: 0, value: 4.0 }), (ctx(1), EstimatedCost::Zero)];
        let ans = oracle.value_of_erm(&ErmQuery::new(&past, &[])).unwrap();
        assert_eq!(ans, ErmAnswer { value: 0.0, argmin_policy: 1 });
    }

    #[test]
    fn negative_hallucination_attracts_minimizer() {
        let mut oracle = ExhaustiveOracle::new(two_constant_policies());
        let step = HallucinationStep::new(ctx(1), Noise::OneHot { arm: 1, sign: Sign::Minus }, 4.0, 2, 0.5).unwrap();
        let ans = oracle.value_of_erm(&ErmQuery::new(&[], &[step])).unwrap();
        assert_eq!(ans, ErmAnswer { value: -8.0, argmin_policy: 1 });
    }

    #[test]
    fn override_requires_current_context() {
        let mut oracle = ExhaustiveOracle::new(two_constant_policies());
        let mut q = ErmQuery::new(&[], &[]);
        q.spike_override = Some(SpikeOverride { action: 0, value: 4.0 });
        assert!(oracle.value_of_erm(&q).is_err());
        assert_eq!(oracle.calls(), 0);
    }

    #[test]
    fn out_of_range_context_rejected() {
        let mut oracle = ExhaustiveOracle::new(two_constant_policies());
        let past = [(Context::unchecked(7), EstimatedCost::Zero)];
        assert!(matches!(oracle.value_of_erm(&ErmQuery::new(&past, &[])), Err(Error::Input(_))));
    }

    #[test]
    fn benchmark_examples() {
        let class = two_constant_policies();
        let costs = vec![CostVector::new(vec![0.2, 0.7], 2).unwrap(), CostVector::new(vec![0.5, 0.1], 2).unwrap()];
        let ans = best_fixed_policy_cost(&[ctx(0), ctx(1)], &costs, &class).unwrap();
        assert!((ans.value - 0.7).abs() < 1e-12);
        assert_eq!(ans.argmin_policy, 0);

        let zeros = vec![CostVector::constant(0.0, 2).unwrap(); 2];
        assert_eq!(
            best_fixed_policy_cost(&[ctx(0), ctx(1)], &zeros, &class).unwrap(),
            ErmAnswer { value: 0.0, argmin_policy: 0 }
        );
        assert!(best_fixed_policy_cost(&[ctx(0)], &zeros, &class).is_err());
    }

    #[test]
    fn counts_calls() {
        let mut oracle = ExhaustiveOracle::new(two_constant_policies());
        for _ in 0..5 {
            oracle.value_of_erm(&ErmQuery::new(&[], &[])).unwrap();
        }
        assert_eq!(oracle.calls(), 5);
    }
}
