//! Context distributions and cost-generating adversaries.
//!
//! An adversary commits to `c_t` after seeing `x_t` and `q_t` and before the
//! learner draws its action: [`Adversary::cost`] takes no action argument, and
//! the learner only samples once the returned vector is in hand.

use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, contract_err, input_err, Error, Result};
use crate::rng::{stream, Stream, StreamRng};
use crate::types::{ActionDistribution, Context, CostVector, PolicyClass, PROB_SUM_TOLERANCE};

/// The i.i.d. context law `D` over a finite universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextDistribution {
    probs: Vec<f64>,
    #[serde(skip)]
    sampler: Option<WeightedIndex<f64>>,
}

impl ContextDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(input_err!("context distribution needs at least one context"));
        }
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::Validation(format!("context probabilities {probs:?} must be nonnegative")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::Validation(format!("context probabilities sum to {sum}, not 1")));
        }
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::Validation(e.to_string()))?;
        Ok(Self { probs, sampler: Some(sampler) })
    }

    pub fn uniform(num_contexts: usize) -> Result<Self> {
        Self::new(vec![1.0 / num_contexts as f64; num_contexts])
    }

    pub fn point_mass(id: usize, num_contexts: usize) -> Result<Self> {
        let mut probs = vec![0.0; num_contexts];
        *probs.get_mut(id).ok_or_else(|| input_err!("context {id} outside 0..{num_contexts}"))? = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_contexts(&self) -> usize {
        self.probs.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        let id = match &self.sampler {
            Some(s) => s.sample(rng),
            None => WeightedIndex::new(&self.probs).expect("validated on construction").sample(rng),
        };
        Context::unchecked(id)
    }
}

/// Draws one context from `dist`.
pub fn sample_context<R: Rng + ?Sized>(dist: &ContextDistribution, rng: &mut R) -> Context {
    dist.sample(rng)
}

/// How stochastic costs are drawn around their per-context means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseLaw {
    /// Independent `Bernoulli(mean_i)` per action.
    Bernoulli,
    /// One shared uniform `u`; action `i` costs `1{u < mean_i}`.
    CommonBernoulli,
    /// Costs equal the means.
    None,
}

/// Adaptive rules that read the action law shown to them but never the learner's action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveRule {
    /// Cost 1 on the most likely action (lowest index on ties), 0 elsewhere.
    PunishTheMode,
    /// Cost 1 on every action with `q_t(i) > 1/K`.
    PunishAboveUniform,
    /// Cost 1 on the action the current best policy in hindsight takes at `x_t`.
    BestPolicyChaser,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AdversarySpec {
    FixedSequence(Vec<CostVector>),
    Stochastic { means: Vec<Vec<f64>>, noise: NoiseLaw },
    Adaptive(AdaptiveRule),
}

impl AdversarySpec {
    pub fn validate(&self, num_contexts: usize, num_actions: usize, horizon: usize) -> Result<()> {
        match self {
            Self::FixedSequence(costs) => {
                if costs.len() < horizon {
                    return Err(config_err!("fixed sequence has {} rounds, horizon is {horizon}", costs.len()));
                }
                if let Some(c) = costs.iter().find(|c| c.len() != num_actions) {
                    return Err(config_err!("fixed sequence row has {} actions, expected {num_actions}", c.len()));
                }
            }
            Self::Stochastic { means, .. } => {
                if means.len() != num_contexts {
                    return Err(config_err!("stochastic means cover {} contexts, expected {num_contexts}", means.len()));
                }
                for row in means {
                    CostVector::new(row.clone(), num_actions).map_err(|e| config_err!("stochastic means: {e}"))?;
                }
            }
            Self::Adaptive(_) => {}
        }
        Ok(())
    }
}

/// Live adversary state for one run.
#[derive(Clone, Debug)]
pub struct Adversary {
    spec: AdversarySpec,
    num_actions: usize,
    class: Arc<PolicyClass>,
    hindsight: Vec<f64>,
    rng: StreamRng,
}

impl Adversary {
    pub fn new(spec: AdversarySpec, class: Arc<PolicyClass>, seed: u64) -> Self {
        let n = class.len();
        Self {
            spec,
            num_actions: class.num_actions(),
            class,
            hindsight: vec![0.0; n],
            rng: stream(seed, Stream::Adversary),
        }
    }

    pub fn spec(&self) -> &AdversarySpec {
        &self.spec
    }

    /// Commits to `c_t` for round `t` (1-based) given `x_t` and `q_t`.
    pub fn cost(&mut self, t: usize, context: Context, q: &ActionDistribution) -> Result<CostVector> {
        let k = self.num_actions;
        let raw = match &self.spec {
            AdversarySpec::FixedSequence(costs) => costs
                .get(t.wrapping_sub(1))
                .ok_or_else(|| input_err!("fixed sequence has no round {t}"))?
                .as_slice()
                .to_vec(),
            AdversarySpec::Stochastic { means, noise } => {
                let mean = means.get(context.id()).ok_or_else(|| input_err!("no means for context {}", context.id()))?;
                match noise {
                    NoiseLaw::Bernoulli => mean.iter().map(|m| f64::from(self.rng.random::<f64>() < *m)).collect(),
                    NoiseLaw::CommonBernoulli => {
                        let u: f64 = self.rng.random();
                        mean.iter().map(|m| f64::from(u < *m)).collect()
                    }
                    NoiseLaw::None => mean.clone(),
                }
            }
            AdversarySpec::Adaptive(rule) => {
                let mut c = vec![0.0; k];
                match rule {
                    AdaptiveRule::PunishTheMode => c[q.mode()] = 1.0,
                    AdaptiveRule::PunishAboveUniform => {
                        let uniform = 1.0 / k as f64;
                        for (ci, p) in c.iter_mut().zip(q.probs()) {
                            if *p > uniform + 1e-12 {
                                *ci = 1.0;
                            }
                        }
                    }
                    AdaptiveRule::BestPolicyChaser => {
                        let mut leader = 0;
                        for (i, v) in self.hindsight.iter().enumerate() {
                            if *v < self.hindsight[leader] {
                                leader = i;
                            }
                        }
                        c[self.class.policies()[leader].act(context)] = 1.0;
                    }
                }
                c
            }
        };
        let costs = CostVector::new(raw, k).map_err(|e| contract_err!("adversary emitted invalid costs: {e}"))?;
        for (h, p) in self.hindsight.iter_mut().zip(self.class.policies()) {
            *h += costs.get(p.act(context));
        }
        Ok(costs)
    }
}

/// Context stream plus adversary: everything outside the learner.
#[derive(Clone, Debug)]
pub struct Environment {
    contexts: ContextDistribution,
    adversary: Adversary,
    rng: StreamRng,
}

impl Environment {
    pub fn new(contexts: ContextDistribution, adversary: Adversary, seed: u64) -> Self {
        Self { contexts, adversary, rng: stream(seed, Stream::Contexts) }
    }

    pub fn next_context(&mut self) -> Context {
        self.contexts.sample(&mut self.rng)
    }

    pub fn cost(&mut self, t: usize, context: Context, q: &ActionDistribution) -> Result<CostVector> {
        self.adversary.cost(t, context, q)
    }
}

/// The named adversaries every regret check runs against.
///
/// `identical` gives all actions the same (shared) Bernoulli cost, so regret
/// is exactly zero. `stochastic` makes action `x mod K` the cheap one at
/// context `x`. The other three adapt to `q_t`.
pub fn builtin_adversaries(num_contexts: usize, num_actions: usize) -> Vec<(String, AdversarySpec)> {
    let stochastic = (0..num_contexts)
        .map(|x| (0..num_actions).map(|a| if a == x % num_actions { 0.2 } else { 0.7 }).collect())
        .collect();
    vec![
        (
            "identical".into(),
            AdversarySpec::Stochastic { means: vec![vec![0.5; num_actions]; num_contexts], noise: NoiseLaw::CommonBernoulli },
        ),
        ("stochastic".into(), AdversarySpec::Stochastic { means: stochastic, noise: NoiseLaw::Bernoulli }),
        ("punish-the-mode".into(), AdversarySpec::Adaptive(AdaptiveRule::PunishTheMode)),
        ("punish-above-uniform".into(), AdversarySpec::Adaptive(AdaptiveRule::PunishAboveUniform)),
        ("best-policy-chaser".into(), AdversarySpec::Adaptive(AdaptiveRule::BestPolicyChaser)),
    ]
}

/// Reads a fixed cost sequence: one row per round, `K` comma-separated
/// values in `[0, 1]`, no header.
pub fn load_cost_csv(path: &Path, num_actions: usize) -> Result<Vec<CostVector>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_err!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config_err!("{}: {e}", path.display()))?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| config_err!("{} row {}: {v:?}: {e}", path.display(), line + 1)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(CostVector::new(values, num_actions).map_err(|e| config_err!("{} row {}: {e}", path.display(), line + 1))?);
    }
    if rows.is_empty() {
        return Err(config_err!("{} contains no cost rows", path.display()));
    }
    Ok(rows)
}
