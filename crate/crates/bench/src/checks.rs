//! The `verify` subcommand.

use rayon::prelude::*;

use relaxcb::envs::{builtin_adversaries, AdversarySpec};
use relaxcb::learner::{default_gamma, run_episode, EnvSpec, Episode, LearnerSpec};
use relaxcb::rng::{derive_seeds, stream, Stream};
use relaxcb::verify::{
    check_admissibility_step, check_final_condition, check_rademacher_bound, check_regret_bound, CheckReport, Instance,
    VerificationReport,
};
use relaxcb::{Context, EstimatedCost};

use crate::config::{CheckKind, Resolved};
use crate::{with_jobs, BenchError};

/// The exploration rate under test: configured, else tuned.
pub fn verify_gamma(resolved: &Resolved) -> Result<f64, BenchError> {
    let c = &resolved.config;
    match c.verify.gamma {
        Some(g) if !(g > 0.0 && g <= 1.0) => Err(BenchError::Config(format!("verify.gamma must lie in (0, 1], got {g}"))),
        Some(g) => Ok(g),
        None => Ok(default_gamma(c.horizon, c.actions, resolved.class.len())?),
    }
}

fn adversaries(resolved: &Resolved) -> Vec<(String, AdversarySpec)> {
    if resolved.adversaries.is_empty() {
        builtin_adversaries(resolved.config.contexts, resolved.config.actions)
    } else {
        resolved.adversaries.clone()
    }
}

fn episode(resolved: &Resolved, spec: &LearnerSpec, adversary: &AdversarySpec, seed: u64) -> Result<Episode, BenchError> {
    let env = EnvSpec { contexts: resolved.contexts.clone(), adversary: adversary.clone() };
    Ok(run_episode(spec, &env, resolved.class.clone(), resolved.config.horizon, seed)?)
}

fn oracle_budget(resolved: &Resolved, gamma: f64, seed: u64) -> Result<Vec<CheckReport>, BenchError> {
    let learners = if resolved.learners.is_empty() {
        vec![("relax".to_string(), LearnerSpec::Relax { gamma: Some(gamma) })]
    } else {
        resolved.learners.clone()
    };
    let k = resolved.config.actions;
    let mut out = Vec::new();
    for (lname, spec) in &learners {
        for (aname, adv) in adversaries(resolved) {
            let ep = episode(resolved, spec, &adv, seed)?;
            let (limit, exact) = match spec.calls_per_round(k) {
                Some(c) => (c, true),
                None => (1, false),
            };
            let bad = ep
                .records
                .iter()
                .filter(|r| if exact { r.oracle_calls != limit } else { r.oracle_calls > limit })
                .count();
            let most = ep.records.iter().map(|r| r.oracle_calls).max().unwrap_or(0);
            out.push(
                CheckReport::upper(format!("oracle-budget {lname} vs {aname}"), bad as f64, 0.0, 0.0, ep.records.len() as u64)
                    .with_detail(format!("{} {limit} calls per round; max observed {most}", if exact { "exactly" } else { "at most" })),
            );
        }
    }
    Ok(out)
}

/// Relaxation-learner histories, one per adversary, that the step and
/// final-step checks are evaluated along.
fn histories(resolved: &Resolved, gamma: f64, seed: u64) -> Result<Vec<(String, Episode)>, BenchError> {
    let spec = LearnerSpec::Relax { gamma: Some(gamma) };
    adversaries(resolved)
        .into_iter()
        .map(|(name, adv)| Ok((name, episode(resolved, &spec, &adv, seed)?)))
        .collect()
}

fn instance(resolved: &Resolved, gamma: f64) -> Result<Instance, BenchError> {
    let inst = Instance::new(resolved.class.clone(), resolved.contexts.clone(), resolved.config.horizon, gamma)?;
    inst.ensure_tiny().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(inst)
}

fn admissibility(resolved: &Resolved, gamma: f64, seed: u64) -> Result<Vec<CheckReport>, BenchError> {
    let inst = instance(resolved, gamma)?;
    let v = &resolved.config.verify;
    let runs = histories(resolved, gamma, seed)?;
    let jobs: Vec<(&str, &Episode, usize)> = runs
        .iter()
        .flat_map(|(name, ep)| (1..=inst.horizon).map(move |t| (name.as_str(), ep, t)))
        .collect();
    let seeds = derive_seeds(seed, jobs.len());
    jobs.par_iter()
        .zip(seeds)
        .map(|(&(name, ep, t), s)| {
            let history: Vec<(Context, EstimatedCost)> =
                ep.records[..t - 1].iter().map(|r| (r.context, r.estimate)).collect();
            let mut rng = stream(s, Stream::Verifier);
            let mut report = check_admissibility_step(&inst, &history, v.mode, v.n_outer, v.n_inner, &mut rng)?;
            report.check = format!("admissibility {name} t={t}");
            Ok(report)
        })
        .collect()
}

fn final_step(resolved: &Resolved, gamma: f64, seed: u64) -> Result<Vec<CheckReport>, BenchError> {
    let inst = instance(resolved, gamma)?;
    let v = &resolved.config.verify;
    let mut out = Vec::new();
    for (name, ep) in histories(resolved, gamma, seed)? {
        let contexts: Vec<Context> = ep.records.iter().map(|r| r.context).collect();
        let costs: Vec<_> = ep.records.iter().map(|r| r.costs.clone()).collect();
        let qs: Vec<_> = ep.records.iter().map(|r| r.q.clone()).collect();
        let mut rng = stream(seed, Stream::Verifier);
        let mut report = check_final_condition(&inst, &contexts, &costs, &qs, v.mode, v.final_samples, &mut rng)?;
        report.check = format!("final-step {name}");
        out.push(report);
    }
    Ok(out)
}

/// Runs `checks` (the configured list when `None`) on `jobs` workers.
/// Hypothesis violations and oversized instances are configuration errors.
pub fn run_checks(resolved: &Resolved, checks: Option<&[CheckKind]>, jobs: usize) -> Result<VerificationReport, BenchError> {
    let c = &resolved.config;
    let checks = checks.unwrap_or(&c.verify.checks);
    if checks.is_empty() {
        return Err(BenchError::Config("no checks selected".into()));
    }
    let gamma = verify_gamma(resolved)?;
    let seed = derive_seeds(c.master_seed, 1)[0];
    log::info!("verifying with gamma = {gamma}");
    with_jobs(jobs, || {
        let mut reports = Vec::new();
        for kind in checks {
            log::info!("check {}", kind.name());
            let part = match kind {
                CheckKind::OracleBudget => oracle_budget(resolved, gamma, seed)?,
                CheckKind::Admissibility => admissibility(resolved, gamma, seed)?,
                CheckKind::FinalStep => final_step(resolved, gamma, seed)?,
                CheckKind::Rademacher => vec![check_rademacher_bound(
                    &resolved.class,
                    &resolved.contexts,
                    c.horizon,
                    gamma,
                    c.verify.rademacher_samples,
                    seed,
                )?],
                CheckKind::Regret => check_regret_bound(
                    resolved.class.clone(),
                    &resolved.contexts,
                    c.horizon,
                    gamma,
                    &adversaries(resolved),
                    c.verify.regret_seeds,
                    c.master_seed,
                )?,
            };
            reports.extend(part);
        }
        Ok(VerificationReport::new(reports))
    })?
}
