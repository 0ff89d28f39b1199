//! Domain types shared by every module.
//!
//! All types validate on construction and are plain immutable values after
//! that. Actions, contexts and policies are 0-indexed; rounds are 1-indexed
//! (`t` in `1..=T`), so a rollout drawn at round `t` covers `T - t` steps.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract_err, input_err, Error, Result};

/// Absolute tolerance on the sum of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Absolute slack applied when checking the exploration floor `gamma / K`.
pub const FLOOR_TOLERANCE: f64 = 1e-12;

/// Version of the seeded random policy-class generator.
///
/// Bump when [`PolicyClass::random`] changes its draw order; existing
/// experiment configs depend on the tables it produces.
pub const RANDOM_CLASS_VERSION: u32 = 1;

/// An element of a finite context universe `0..X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context(usize);

impl Context {
    pub fn new(id: usize, universe: usize) -> Result<Self> {
        if id >= universe {
            return Err(input_err!("context id {id} outside universe of size {universe}"));
        }
        Ok(Self(id))
    }

    /// Builds a context whose id has already been range-checked by the caller.
    pub(crate) const fn unchecked(id: usize) -> Self {
        Self(id)
    }

    pub const fn id(self) -> usize {
        self.0
    }
}

/// A full cost vector `c_t` in `[0, 1]^K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>, num_actions: usize) -> Result<Self> {
        if costs.len() != num_actions {
            return Err(input_err!(
                "cost vector has {} entries, expected {num_actions}",
                costs.len()
            ));
        }
        if let Some((i, c)) = costs.iter().enumerate().find(|(_, c)| !(0.0..=1.0).contains(*c)) {
            return Err(input_err!("cost[{i}] = {c} outside [0, 1]"));
        }
        Ok(Self(costs))
    }

    /// Cost `level` on every one of `num_actions` actions.
    pub fn constant(level: f64, num_actions: usize) -> Result<Self> {
        Self::new(vec![level; num_actions], num_actions)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, action: usize) -> f64 {
        self.0[action]
    }

    /// `<q, c>`, the expected cost of playing `q` against this vector.
    pub fn expected_under(&self, q: &ActionDistribution) -> f64 {
        self.0.iter().zip(q.probs()).map(|(c, p)| c * p).sum()
    }
}

/// A deterministic lookup-table policy mapping contexts to actions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    table: Vec<usize>,
}

impl Policy {
    pub fn new(table: Vec<usize>, num_actions: usize) -> Result<Self> {
        if table.is_empty() {
            return Err(input_err!("policy table must cover at least one context"));
        }
        if let Some((x, a)) = table.iter().enumerate().find(|(_, a)| **a >= num_actions) {
            return Err(input_err!("policy maps context {x} to action {a}, but K = {num_actions}"));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn num_contexts(&self) -> usize {
        self.table.len()
    }

    /// Action chosen at an already range-checked context.
    #[inline]
    pub(crate) fn act(&self, context: Context) -> usize {
        self.table[context.id()]
    }
}

/// The action `policy` takes at `context`.
pub fn policy_action(policy: &Policy, context: Context) -> Result<usize> {
    policy
        .table
        .get(context.id())
        .copied()
        .ok_or_else(|| input_err!("context {} outside policy domain of size {}", context.id(), policy.table.len()))
}

/// A finite, indexed benchmark class `Pi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyClass {
    policies: Vec<Policy>,
    num_contexts: usize,
    num_actions: usize,
}

impl PolicyClass {
    pub fn new(policies: Vec<Policy>, num_actions: usize) -> Result<Self> {
        let first = policies
            .first()
            .ok_or_else(|| Error::Config("policy class must contain at least one policy".into()))?;
        let num_contexts = first.num_contexts();
        for (i, p) in policies.iter().enumerate() {
            if p.num_contexts() != num_contexts {
                return Err(input_err!(
                    "policy {i} covers {} contexts, policy 0 covers {num_contexts}",
                    p.num_contexts()
                ));
            }
            if let Some(a) = p.table.iter().find(|a| **a >= num_actions) {
                return Err(input_err!("policy {i} uses action {a}, but K = {num_actions}"));
            }
        }
        Ok(Self { policies, num_contexts, num_actions })
    }

    /// Builds a class from raw tables.
    pub fn from_tables(tables: Vec<Vec<usize>>, num_actions: usize) -> Result<Self> {
        let policies = tables
            .into_iter()
            .map(|t| Policy::new(t, num_actions))
            .collect::<Result<Vec<_>>>()?;
        Self::new(policies, num_actions)
    }

    /// `size` uniform-random lookup tables drawn from `seed`.
    ///
    /// Draw order (generator version [`RANDOM_CLASS_VERSION`]): ChaCha8 seeded
    /// with `seed`, policies in index order, contexts in id order, one
    /// `random_range(0..K)` per entry.
    pub fn random(size: usize, num_contexts: usize, num_actions: usize, seed: u64) -> Result<Self> {
        if size == 0 || num_contexts == 0 || num_actions == 0 {
            return Err(Error::Config(format!(
                "random class needs positive size, X and K (got {size}, {num_contexts}, {num_actions})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = (0..size)
            .map(|_| (0..num_contexts).map(|_| rng.random_range(0..num_actions)).collect())
            .collect();
        Self::from_tables(tables, num_actions)
    }

    /// Every one of the `K^X` lookup tables, in lexicographic order.
    pub fn exhaustive(num_contexts: usize, num_actions: usize) -> Result<Self> {
        let total = (num_actions as u64)
            .checked_pow(num_contexts as u32)
            .filter(|n| *n <= 1 << 20)
            .ok_or_else(|| Error::Config(format!("K^X too large for an exhaustive class ({num_actions}^{num_contexts})")))?;
        let tables = (0..total)
            .map(|mut code| {
                let mut table = vec![0; num_contexts];
                for slot in table.iter_mut().rev() {
                    *slot = (code % num_actions as u64) as usize;
                    code /= num_actions as u64;
                }
                table
            })
            .collect();
        Self::from_tables(tables, num_actions)
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn check_context(&self, context: Context) -> Result<()> {
        if context.id() >= self.num_contexts {
            return Err(input_err!(
                "context {} outside universe of size {}",
                context.id(),
                self.num_contexts
            ));
        }
        Ok(())
    }
}

/// A probability vector over `K` actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

/// Accepts `probs` iff every entry is nonnegative and the sum is within
/// [`PROB_SUM_TOLERANCE`] of one. Accepted vectors are divided by their sum
/// once, so residual drift is removed.
pub fn validate_distribution(probs: Vec<f64>) -> Result<ActionDistribution> {
    let sum = check_probabilities(&probs)?;
    let probs = if sum == 1.0 { probs } else { probs.into_iter().map(|p| p / sum).collect() };
    Ok(ActionDistribution { probs })
}

/// Same acceptance test as [`validate_distribution`] but keeps the entries
/// bit for bit, for producers whose output sums to one by construction.
pub(crate) fn validate_without_rescaling(probs: Vec<f64>) -> Result<ActionDistribution> {
    check_probabilities(&probs)?;
    Ok(ActionDistribution { probs })
}

fn check_probabilities(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Validation("empty probability vector".into()));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| **p < 0.0 || !p.is_finite()) {
        return Err(Error::Validation(format!("probability[{i}] = {p} is not a nonnegative number")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(Error::Validation(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(sum)
}

impl ActionDistribution {
    pub fn uniform(num_actions: usize) -> Self {
        Self { probs: vec![1.0 / num_actions as f64; num_actions] }
    }

    pub fn point_mass(action: usize, num_actions: usize) -> Result<Self> {
        if action >= num_actions {
            return Err(input_err!("action {action} outside 0..{num_actions}"));
        }
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lowest index of the largest probability.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Checks `min_i q(i) >= gamma / K` up to [`FLOOR_TOLERANCE`].
    pub fn check_floor(&self, gamma: f64) -> Result<()> {
        let floor = gamma / self.probs.len() as f64;
        let min = self.min_prob();
        if min < floor - FLOOR_TOLERANCE {
            return Err(contract_err!("exploration floor violated: min q = {min} < gamma/K = {floor}"));
        }
        Ok(())
    }

    /// Draws one action.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // Validated vectors always have positive total weight.
        WeightedIndex::new(&self.probs)
            .expect("validated distribution has positive mass")
            .sample(rng)
    }
}

/// The discretized cost estimate: zero, or a single spike of height `K / gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EstimatedCost {
    Zero,
    Spike { action: usize, value: f64 },
}

impl EstimatedCost {
    /// A spike of height exactly `K / gamma` on `action`.
    pub fn spike(action: usize, num_actions: usize, gamma: f64) -> Result<Self> {
        if action >= num_actions {
            return Err(input_err!("spike action {action} outside 0..{num_actions}"));
        }
        check_gamma(gamma)?;
        Ok(Self::Spike { action, value: spike_height(num_actions, gamma) })
    }

    #[inline]
    pub fn value_at(&self, action: usize) -> f64 {
        match *self {
            Self::Spike { action: a, value } if a == action => value,
            _ => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// True when a spike's height is exactly `K / gamma` (always true for `Zero`).
    pub fn matches_scale(&self, num_actions: usize, gamma: f64) -> bool {
        match *self {
            Self::Zero => true,
            Self::Spike { action, value } => action < num_actions && value == spike_height(num_actions, gamma),
        }
    }
}

/// `K / gamma`, the height of every nonzero estimate and hallucination scale.
#[inline]
pub fn spike_height(num_actions: usize, gamma: f64) -> f64 {
    num_actions as f64 / gamma
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(input_err!("gamma = {gamma} outside (0, 1]"));
    }
    Ok(())
}

/// Rademacher sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Self::Minus => -1.0,
            Self::Plus => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::Minus => Self::Plus,
            Self::Plus => Self::Minus,
        }
    }
}

/// The Rademacher vector `epsilon_tau` of one hallucinated round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    /// Zero everywhere except a uniformly chosen arm.
    OneHot { arm: usize, sign: Sign },
    /// An independent sign on every arm.
    Dense(Box<[Sign]>),
}

/// One hallucinated future round `(x, epsilon, Z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HallucinationStep {
    context: Context,
    noise: Noise,
    z: f64,
}

impl HallucinationStep {
    /// Validates `z in {0, K/gamma}` and the noise shape against `K`.
    pub fn new(context: Context, noise: Noise, z: f64, num_actions: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if z != 0.0 && z != spike_height(num_actions, gamma) {
            return Err(input_err!("hallucination scale {z} not in {{0, K/gamma}}"));
        }
        match &noise {
            Noise::OneHot { arm, .. } if *arm >= num_actions => {
                return Err(input_err!("hallucinated arm {arm} outside 0..{num_actions}"))
            }
            Noise::Dense(signs) if signs.len() != num_actions => {
                return Err(input_err!("dense noise has {} signs, expected {num_actions}", signs.len()))
            }
            _ => {}
        }
        Ok(Self { context, noise, z })
    }

    pub(crate) fn from_parts(context: Context, noise: Noise, z: f64) -> Self {
        Self { context, noise, z }
    }

    pub fn context(&self) -> Context {
        self.context
    }

    pub fn noise(&self) -> &Noise {
        &self.noise
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `epsilon_tau(action)`.
    #[inline]
    pub fn epsilon(&self, action: usize) -> f64 {
        match &self.noise {
            Noise::OneHot { arm, sign } => {
                if *arm == action {
                    sign.value()
                } else {
                    0.0
                }
            }
            Noise::Dense(signs) => signs[action].value(),
        }
    }

    /// `2 Z_tau epsilon_tau(action)`, this step's term in the oracle objective.
    #[inline]
    pub fn term(&self, action: usize) -> f64 {
        2.0 * self.z * self.epsilon(action)
    }

    /// Same step with every sign negated.
    pub fn sign_flipped(&self) -> Self {
        let noise = match &self.noise {
            Noise::OneHot { arm, sign } => Noise::OneHot { arm: *arm, sign: sign.flipped() },
            Noise::Dense(signs) => Noise::Dense(signs.iter().map(|s| s.flipped()).collect()),
        };
        Self { context: self.context, noise, z: self.z }
    }
}

/// The hallucinated future `rho_t = (x, epsilon, Z)_{t+1..T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    round: usize,
    horizon: usize,
    steps: Vec<HallucinationStep>,
}

impl Rollout {
    pub fn new(round: usize, horizon: usize, steps: Vec<HallucinationStep>) -> Result<Self> {
        if round > horizon {
            return Err(input_err!("round {round} beyond horizon {horizon}"));
        }
        if steps.len() != horizon - round {
            return Err(input_err!(
                "rollout at round {round} of {horizon} needs {} steps, got {}",
                horizon - round,
                steps.len()
            ));
        }
        Ok(Self { round, horizon, steps })
    }

    pub fn empty(horizon: usize) -> Self {
        Self { round: horizon, horizon, steps: Vec::new() }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn steps(&self) -> &[HallucinationStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Everything observable about one played round.
///
/// `costs` is the adversary's full vector; the learner only ever read
/// `costs[action]`, but regret accounting needs all of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub context: Context,
    pub q: ActionDistribution,
    pub action: usize,
    pub observed_cost: f64,
    pub estimate: EstimatedCost,
    pub oracle_calls: u64,
    pub costs: CostVector,
}

impl RoundRecord {
    /// `<q_t, c_t>`.
    pub fn expected_cost(&self) -> f64 {
        self.costs.expected_under(&self.q)
    }
}
