//! Numerical certification of the relaxation's guarantees on small instances.
//!
//! Every check is one-sided. Monte-Carlo checks pass only within a fixed
//! [`SIGMA_MARGIN`] standard errors; when the outcome space has at most
//! [`MAX_EXACT_ATOMS`] atoms the check enumerates it and reports zero
//! standard error instead.

mod admissibility;
mod bounds;
mod final_step;
mod rel;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use admissibility::{check_admissibility_step, check_admissibility_step_with, shipped_strategy, step_objective, StrategyFn};
pub use bounds::{check_rademacher_bound, check_regret_bound, rademacher_bound, regret_bound};
pub use final_step::{check_final_condition, relax_distributions};
pub use rel::{enumerate_futures, estimate_rel, exact_rel, future_atom_count};

use crate::envs::ContextDistribution;
use crate::error::{config_err, Error, Result};
use crate::types::{check_gamma, PolicyClass, RoundRecord};

/// One-sided pass margin, in standard errors.
pub const SIGMA_MARGIN: f64 = 3.0;

/// Largest outcome space that is enumerated instead of sampled.
pub const MAX_EXACT_ATOMS: u64 = 1_000_000;

/// Rounding slack for comparisons between exactly enumerated quantities.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// How an expectation is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Enumerate when the outcome space is small enough, otherwise sample.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

/// A mean with its standard error; `se == 0` for exact values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, se: 0.0, n: 0 }
    }

    pub fn is_exact(&self) -> bool {
        self.se == 0.0 && self.n == 0
    }
}

/// A small instance on which the admissibility conditions can be evaluated.
#[derive(Clone, Debug)]
pub struct Instance {
    pub class: Arc<PolicyClass>,
    pub contexts: ContextDistribution,
    pub horizon: usize,
    pub gamma: f64,
}

impl Instance {
    pub fn new(class: Arc<PolicyClass>, contexts: ContextDistribution, horizon: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if contexts.num_contexts() != class.num_contexts() {
            return Err(config_err!(
                "context distribution covers {} contexts, policy class {}",
                contexts.num_contexts(),
                class.num_contexts()
            ));
        }
        if horizon == 0 {
            return Err(config_err!("horizon must be positive"));
        }
        Ok(Self { class, contexts, horizon, gamma })
    }

    pub fn num_actions(&self) -> usize {
        self.class.num_actions()
    }

    /// Refuses instances beyond `K <= 3, T <= 4, |Pi| <= 8, X <= 3`.
    pub fn ensure_tiny(&self) -> Result<()> {
        let (k, t, p, x) = (self.num_actions(), self.horizon, self.class.len(), self.class.num_contexts());
        if k > 3 || t > 4 || p > 8 || x > 3 {
            return Err(config_err!(
                "instance too large for admissibility checks (K = {k}, T = {t}, |Pi| = {p}, X = {x}; limits 3, 4, 8, 3)"
            ));
        }
        Ok(())
    }
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub n: u64,
    pub pass: bool,
    #[serde(default)]
    pub detail: String,
}

impl CheckReport {
    /// Passes iff `lhs <= rhs + SIGMA_MARGIN * se` (or within
    /// [`EXACT_TOLERANCE`] when `se == 0`).
    pub fn upper(check: impl Into<String>, lhs: f64, rhs: f64, se: f64, n: u64) -> Self {
        let slack = if se == 0.0 { EXACT_TOLERANCE } else { SIGMA_MARGIN * se };
        Self { check: check.into(), lhs, rhs, se, n, pass: lhs <= rhs + slack, detail: String::new() }
    }

    /// Passes iff `lhs >= rhs - SIGMA_MARGIN * se`.
    pub fn lower(check: impl Into<String>, lhs: f64, rhs: f64, se: f64, n: u64) -> Self {
        let slack = if se == 0.0 { EXACT_TOLERANCE } else { SIGMA_MARGIN * se };
        Self { check: check.into(), lhs, rhs, se, n, pass: lhs >= rhs - slack, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// `rhs - lhs`: positive means room to spare for upper checks.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Machine-readable verification output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub checks: Vec<CheckReport>,
    pub all_pass: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckReport>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        Self { checks, all_pass }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain data")
    }

    /// Parses and validates a report: unknown or missing fields, non-numeric
    /// values and an inconsistent `all_pass` flag are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Validation(format!("report schema: {e}")))?;
        if report.all_pass != report.checks.iter().all(|c| c.pass) {
            return Err(Error::Validation("all_pass disagrees with individual checks".into()));
        }
        Ok(report)
    }
}

/// Oracle calls per round of a trace.
pub fn count_oracle_calls(trace: &[RoundRecord]) -> Vec<u64> {
    trace.iter().map(|r| r.oracle_calls).collect()
}

/// Fails on the first round whose call count is not exactly `expected`.
pub fn check_exact_oracle_budget(trace: &[RoundRecord], expected: u64) -> Result<()> {
    match trace.iter().find(|r| r.oracle_calls != expected) {
        Some(r) => Err(Error::Contract(format!(
            "round {} issued {} oracle calls, expected {expected}",
            r.t, r.oracle_calls
        ))),
        None => Ok(()),
    }
}

/// Fails on the first round whose call count exceeds `limit`.
pub fn check_oracle_budget_at_most(trace: &[RoundRecord], limit: u64) -> Result<()> {
    match trace.iter().find(|r| r.oracle_calls > limit) {
        Some(r) => Err(Error::Contract(format!(
            "round {} issued {} oracle calls, limit {limit}",
            r.t, r.oracle_calls
        ))),
        None => Ok(()),
    }
}

/// Fails on the first round whose `q_t` dips below `gamma / K`.
pub fn check_floor(trace: &[RoundRecord], gamma: f64) -> Result<()> {
    for r in trace {
        r.q.check_floor(gamma).map_err(|e| Error::Contract(format!("round {}: {e}", r.t)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip_and_schema() {
        let report = VerificationReport::new(vec![
            CheckReport::upper("a", 1.0, 2.0, 0.1, 10),
            CheckReport::lower("b", 1.0, 2.0, 0.0, 0).with_detail("exact"),
        ]);
        assert!(!report.all_pass);
        let parsed = VerificationReport::from_json(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
        assert!(VerificationReport::from_json(r#"{"checks": [], "all_pass": true, "extra": 1}"#).is_err());
        assert!(VerificationReport::from_json(r#"{"checks": [{"check": "x", "lhs": 1, "rhs": 2, "n": 1, "pass": true}], "all_pass": true}"#).is_err());
        assert!(VerificationReport::from_json(r#"{"checks": [], "all_pass": false}"#).is_err());
    }

    #[test]
    fn margins_are_one_sided() {
        assert!(CheckReport::upper("u", 1.29, 1.0, 0.1, 100).pass);
        assert!(!CheckReport::upper("u", 1.31, 1.0, 0.1, 100).pass);
        assert!(CheckReport::lower("l", 0.71, 1.0, 0.1, 100).pass);
        assert!(!CheckReport::upper("u", 1.0 + 1e-6, 1.0, 0.0, 0).pass);
    }
}
