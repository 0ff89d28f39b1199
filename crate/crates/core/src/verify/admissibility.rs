use rand::Rng;

use crate::error::{config_err, input_err, Result};
use crate::estimator::spike_probability;
use crate::oracle::{ErmOracle, ExhaustiveOracle};
use crate::relaxation::{draw_future, Hallucination};
use crate::stats::RunningStats;
use crate::strategy::relaxation_strategy;
use crate::types::{ActionDistribution, Context, CostVector, EstimatedCost, Rollout};

use super::rel::{enumerate_futures, estimate_rel, exact_rel, future_atom_count};
use super::{CheckReport, Estimate, Instance, Mode, MAX_EXACT_ATOMS};

/// A strategy under test: maps `(history_{1..t-1}, rho_t, x_t)` to `q_t`.
pub type StrategyFn<'a> =
    dyn FnMut(&[(Context, EstimatedCost)], &Rollout, Context, &mut dyn ErmOracle) -> Result<ActionDistribution> + 'a;

/// The learner's own `q_t` for one rollout.
pub fn shipped_strategy(
    history: &[(Context, EstimatedCost)],
    rollout: &Rollout,
    context: Context,
    gamma: f64,
    oracle: &mut dyn ErmOracle,
) -> Result<ActionDistribution> {
    let k = oracle.class().num_actions();
    Ok(relaxation_strategy(history, rollout, context, gamma, k, oracle)?.q)
}

/// Everything needed to evaluate `E_{rho, y, coin}[c(y) + Rel(I_{1..t})]` at
/// one context for any cost vector `c`.
///
/// `rel[0]` is `Rel` after a zero estimate, `rel[1 + i]` after a spike on `i`.
struct ContextTerms {
    rel: Vec<Estimate>,
    draws: Draws,
}

enum Draws {
    /// `E_rho[q_rho]`; with it the expectation is affine and closed-form.
    Exact(Vec<f64>),
    /// Joint samples `(y, q_rho(y), u)` shared by every cost vector.
    Sampled(Vec<(usize, f64, f64)>),
}

impl ContextTerms {
    fn objective(&self, instance: &Instance, costs: &[f64]) -> Estimate {
        let k = instance.num_actions() as f64;
        let gamma = instance.gamma;
        let rel0 = self.rel[0].mean;
        match &self.draws {
            Draws::Exact(q_bar) => {
                let mut value = rel0;
                for (i, c) in costs.iter().enumerate() {
                    value += q_bar[i] * c + gamma * c / k * (self.rel[1 + i].mean - rel0);
                }
                // Propagate Rel uncertainty when it was sampled.
                let mut var = (1.0 - costs.iter().map(|c| gamma * c / k).sum::<f64>()).powi(2) * self.rel[0].se.powi(2);
                for (i, c) in costs.iter().enumerate() {
                    var += (gamma * c / k).powi(2) * self.rel[1 + i].se.powi(2);
                }
                Estimate { mean: value, se: var.sqrt(), n: 0 }
            }
            Draws::Sampled(samples) => {
                let mut stats = RunningStats::new();
                let mut used = vec![0u64; self.rel.len()];
                for &(y, q_y, u) in samples {
                    let p = gamma * costs[y] / (k * q_y);
                    let j = if u < p { 1 + y } else { 0 };
                    used[j] += 1;
                    stats.push(costs[y] + self.rel[j].mean);
                }
                let n = samples.len() as f64;
                let rel_var: f64 = used
                    .iter()
                    .zip(&self.rel)
                    .map(|(count, r)| (*count as f64 / n).powi(2) * r.se.powi(2))
                    .sum();
                let se = (stats.std_error().powi(2) + rel_var).sqrt();
                Estimate { mean: stats.mean(), se, n: stats.count() }
            }
        }
    }
}

fn vertices(k: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1usize << k).map(move |mask| (0..k).map(|i| ((mask >> i) & 1) as f64).collect())
}

fn use_exact(instance: &Instance, t: usize, mode: Mode) -> Result<bool> {
    let fits = |round: usize| future_atom_count(instance, round).is_some_and(|n| n <= MAX_EXACT_ATOMS);
    let small = fits(t) && fits(t - 1);
    match mode {
        Mode::Auto => Ok(small),
        Mode::MonteCarlo => Ok(false),
        Mode::Exact if small => Ok(true),
        Mode::Exact => Err(config_err!("exact enumeration at t = {t} exceeds {MAX_EXACT_ATOMS} atoms")),
    }
}

#[allow(clippy::too_many_arguments)]
fn context_terms<R: Rng + ?Sized>(
    instance: &Instance,
    history: &[(Context, EstimatedCost)],
    context: Context,
    strategy: &mut StrategyFn<'_>,
    exact: bool,
    n_outer: u64,
    n_inner: u64,
    oracle: &mut dyn ErmOracle,
    rng: &mut R,
) -> Result<ContextTerms> {
    let k = instance.num_actions();
    let gamma = instance.gamma;
    let t = history.len() + 1;
    let mut extended = history.to_vec();
    extended.push((context, EstimatedCost::Zero));
    let mut rel = Vec::with_capacity(k + 1);
    for j in 0..=k {
        extended[t - 1].1 = if j == 0 { EstimatedCost::Zero } else { EstimatedCost::spike(j - 1, k, gamma)? };
        rel.push(if exact {
            Estimate::exact(exact_rel(&extended, t, instance, oracle)?)
        } else {
            estimate_rel(&extended, t, instance, oracle, n_outer, rng)?
        });
    }
    // The floor contract is enforced through the estimator before any
    // evaluation: a strategy that breaks it never gets scored.
    let checked = |q: &ActionDistribution| -> Result<()> {
        if q.len() != k {
            return Err(input_err!("strategy returned {} probabilities, expected {k}", q.len()));
        }
        for i in 0..k {
            spike_probability(1.0, i, q, gamma, k)?;
        }
        Ok(())
    };
    let draws = if exact {
        let mut q_bar = vec![0.0; k];
        enumerate_futures(instance, t, &mut |rollout, prob| {
            let q = strategy(history, rollout, context, oracle)?;
            checked(&q)?;
            q_bar.iter_mut().zip(q.probs()).for_each(|(acc, p)| *acc += prob * p);
            Ok(())
        })?;
        Draws::Exact(q_bar)
    } else {
        let mut samples = Vec::with_capacity(n_inner as usize);
        for _ in 0..n_inner {
            let rollout = draw_future(Hallucination::OneHot, t, instance.horizon, k, gamma, &instance.contexts, rng)?;
            let q = strategy(history, &rollout, context, oracle)?;
            checked(&q)?;
            let y = q.sample(rng);
            samples.push((y, q.prob(y), rng.random::<f64>()));
        }
        Draws::Sampled(samples)
    };
    Ok(ContextTerms { rel, draws })
}

fn validate_history(instance: &Instance, history: &[(Context, EstimatedCost)]) -> Result<usize> {
    let t = history.len() + 1;
    if t > instance.horizon {
        return Err(input_err!("history of {} rounds leaves no step to check (T = {})", history.len(), instance.horizon));
    }
    for (x, c) in history {
        instance.class.check_context(*x)?;
        if !c.matches_scale(instance.num_actions(), instance.gamma) {
            return Err(input_err!("history estimate {c:?} is not on the K/gamma scale"));
        }
    }
    Ok(t)
}

/// `E_{rho_t, y_t, coin}[c(y_t) + Rel(I_{1..t})]` at a fixed context and an
/// arbitrary `c` in `[0, 1]^K`, for the shipped strategy.
#[allow(clippy::too_many_arguments)]
pub fn step_objective<R: Rng + ?Sized>(
    instance: &Instance,
    history: &[(Context, EstimatedCost)],
    context: Context,
    costs: &CostVector,
    mode: Mode,
    n_outer: u64,
    n_inner: u64,
    rng: &mut R,
) -> Result<Estimate> {
    instance.ensure_tiny()?;
    let t = validate_history(instance, history)?;
    instance.class.check_context(context)?;
    if costs.len() != instance.num_actions() {
        return Err(input_err!("cost vector has {} entries, expected {}", costs.len(), instance.num_actions()));
    }
    let exact = use_exact(instance, t, mode)?;
    let gamma = instance.gamma;
    let mut oracle = ExhaustiveOracle::new(instance.class.clone());
    let mut strategy = |h: &[(Context, EstimatedCost)], r: &Rollout, x: Context, o: &mut dyn ErmOracle| shipped_strategy(h, r, x, gamma, o);
    let terms = context_terms(instance, history, context, &mut strategy, exact, n_outer, n_inner, &mut oracle, rng)?;
    Ok(terms.objective(instance, costs.as_slice()))
}

/// One admissibility step for the shipped strategy; see
/// [`check_admissibility_step_with`].
pub fn check_admissibility_step<R: Rng + ?Sized>(
    instance: &Instance,
    history: &[(Context, EstimatedCost)],
    mode: Mode,
    n_outer: u64,
    n_inner: u64,
    rng: &mut R,
) -> Result<CheckReport> {
    let gamma = instance.gamma;
    let mut strategy = |h: &[(Context, EstimatedCost)], r: &Rollout, x: Context, o: &mut dyn ErmOracle| shipped_strategy(h, r, x, gamma, o);
    check_admissibility_step_with(instance, history, &mut strategy, mode, n_outer, n_inner, rng)
}

/// Checks
/// `E_x sup_c E_{rho, y, coin}[c(y) + Rel(I_{1..t})] <= Rel(I_{1..t-1})`
/// at `t = history.len() + 1`.
///
/// The sup runs over the `2^K` vertices of `[0, 1]^K`, which suffices because
/// the inner expectation is affine in `c`. Contexts are enumerated exactly.
/// In exact mode both sides are enumerated; otherwise every `Rel` value is a
/// Monte-Carlo estimate with `n_outer` rollouts and the inner expectation
/// uses `n_inner` joint draws shared across vertices.
#[allow(clippy::too_many_arguments)]
pub fn check_admissibility_step_with<R: Rng + ?Sized>(
    instance: &Instance,
    history: &[(Context, EstimatedCost)],
    strategy: &mut StrategyFn<'_>,
    mode: Mode,
    n_outer: u64,
    n_inner: u64,
    rng: &mut R,
) -> Result<CheckReport> {
    instance.ensure_tiny()?;
    let t = validate_history(instance, history)?;
    let exact = use_exact(instance, t, mode)?;
    if !exact && (n_outer == 0 || n_inner == 0) {
        return Err(config_err!("Monte-Carlo admissibility check needs n_outer, n_inner >= 1"));
    }
    let k = instance.num_actions();
    let mut oracle = ExhaustiveOracle::new(instance.class.clone());
    let mut lhs = 0.0;
    let mut lhs_var = 0.0;
    let mut inner_n = 0;
    let mut worst = Vec::new();
    for (x, px) in instance.contexts.probs().iter().enumerate() {
        if *px == 0.0 {
            continue;
        }
        let context = Context::unchecked(x);
        let terms = context_terms(instance, history, context, strategy, exact, n_outer, n_inner, &mut oracle, rng)?;
        let (best_c, best) = vertices(k)
            .map(|c| {
                let e = terms.objective(instance, &c);
                (c, e)
            })
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .expect("at least one vertex");
        lhs += px * best.mean;
        lhs_var += (px * best.se).powi(2);
        inner_n += best.n;
        worst.push(format!("x={x}: c={best_c:?}"));
    }
    let rhs = if exact {
        Estimate::exact(exact_rel(history, t - 1, instance, &mut oracle)?)
    } else {
        estimate_rel(history, t - 1, instance, &mut oracle, n_outer, rng)?
    };
    let se = (lhs_var + rhs.se.powi(2)).sqrt();
    let how = if exact { "exact" } else { "monte-carlo" };
    Ok(CheckReport::upper(format!("admissibility-step t={t}"), lhs, rhs.mean, se, inner_n + rhs.n)
        .with_detail(format!("{how}; maximizing vertices {}", worst.join(", "))))
}
