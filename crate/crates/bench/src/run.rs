//! The `run` subcommand: learners x adversaries x seeds.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use relaxcb::learner::{cumulative_expected_regret, run_episode, EnvSpec, Episode};
use relaxcb::rng::derive_seeds;
use relaxcb::verify::{check_exact_oracle_budget, check_floor, check_oracle_budget_at_most, CheckReport, VerificationReport};

use crate::config::{Config, Resolved};
use crate::summarize::{regret_table, RegretRow};
use crate::{with_jobs, write_json, BenchError};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 11] = [
    "run_id",
    "learner",
    "adversary",
    "seed",
    "t",
    "context",
    "action",
    "observed_cost",
    "expected_round_cost",
    "cum_expected_regret",
    "oracle_calls",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub learner: String,
    pub adversary: String,
    pub seed: u64,
    pub expected_regret: f64,
    pub realized_regret: f64,
    pub benchmark_cost: f64,
    pub total_oracle_calls: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub trace_schema_version: u32,
    pub runs: Vec<RunSummary>,
    pub table: Vec<RegretRow>,
    pub checks: VerificationReport,
}

#[derive(Serialize)]
struct Manifest<'a> {
    trace_schema_version: u32,
    master_seed: u64,
    run_seeds: &'a [u64],
    traces: Vec<String>,
    config: Config,
}

fn run_id(learner: &str, adversary: &str, index: usize) -> String {
    format!("{learner}__{adversary}__s{index:03}")
}

/// Structural checks every trace must pass: the oracle budget of its
/// learner and, for the gamma-mixed learners, the exploration floor.
fn trace_checks(id: &str, spec: &relaxcb::learner::LearnerSpec, episode: &Episode, resolved: &Resolved) -> Result<Vec<CheckReport>, BenchError> {
    let records = &episode.records;
    let n = records.len() as u64;
    let k = resolved.class.num_actions();
    let budget = match spec.calls_per_round(k) {
        Some(calls) => check_exact_oracle_budget(records, calls),
        None => check_oracle_budget_at_most(records, 1),
    };
    let bad_budget = records
        .iter()
        .filter(|r| match spec.calls_per_round(k) {
            Some(calls) => r.oracle_calls != calls,
            None => r.oracle_calls > 1,
        })
        .count();
    let mut out = vec![CheckReport::upper(format!("oracle-budget {id}"), bad_budget as f64, 0.0, 0.0, n)
        .with_detail(budget.err().map(|e| e.to_string()).unwrap_or_default())];
    if let Some(gamma) = spec.resolved_gamma(resolved.config.horizon, &resolved.class)? {
        let floor = check_floor(records, gamma);
        let below = records.iter().filter(|r| r.q.check_floor(gamma).is_err()).count();
        out.push(
            CheckReport::upper(format!("floor {id}"), below as f64, 0.0, 0.0, n)
                .with_detail(floor.err().map(|e| e.to_string()).unwrap_or_default()),
        );
    }
    Ok(out)
}

fn write_trace(path: &Path, id: &str, learner: &str, adversary: &str, seed: u64, episode: &Episode, resolved: &Resolved) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    let curve = cumulative_expected_regret(&episode.records, &resolved.class);
    for (r, regret) in episode.records.iter().zip(curve) {
        w.write_record([
            id.to_string(),
            learner.to_string(),
            adversary.to_string(),
            seed.to_string(),
            r.t.to_string(),
            r.context.id().to_string(),
            r.action.to_string(),
            r.observed_cost.to_string(),
            r.expected_cost().to_string(),
            regret.to_string(),
            r.oracle_calls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Executes every (learner, adversary, seed) run on `jobs` workers and
/// writes `traces/<run_id>.csv`, `summary.json` and `manifest.json` under
/// `out_dir`. Output bytes depend only on the config and master seed.
pub fn run_experiment(resolved: &Resolved, out_dir: &Path, jobs: usize) -> Result<RunOutcome, BenchError> {
    let config = &resolved.config;
    if resolved.learners.is_empty() {
        return Err(BenchError::Config("no [[learner]] entries".into()));
    }
    if resolved.adversaries.is_empty() {
        return Err(BenchError::Config("no [[adversary]] entries".into()));
    }
    let seeds = derive_seeds(config.master_seed, config.seeds);
    let traces = out_dir.join("traces");
    std::fs::create_dir_all(&traces)?;

    let mut jobs_list = Vec::new();
    for (learner, spec) in &resolved.learners {
        for (adversary, adv) in &resolved.adversaries {
            for (index, seed) in seeds.iter().enumerate() {
                jobs_list.push((learner, spec, adversary, adv, index, *seed));
            }
        }
    }
    log::info!("{} runs on {} workers", jobs_list.len(), if jobs == 0 { rayon::current_num_threads() } else { jobs });

    let results = with_jobs(jobs, || {
        jobs_list
            .par_iter()
            .map(|(learner, spec, adversary, adv, index, seed)| {
                let id = run_id(learner, adversary, *index);
                let env = EnvSpec { contexts: resolved.contexts.clone(), adversary: (*adv).clone() };
                let episode = run_episode(spec, &env, resolved.class.clone(), config.horizon, *seed)?;
                write_trace(&traces.join(format!("{id}.csv")), &id, learner, adversary, *seed, &episode, resolved)?;
                let checks = trace_checks(&id, spec, &episode, resolved)?;
                let summary = RunSummary {
                    run_id: id,
                    learner: learner.to_string(),
                    adversary: adversary.to_string(),
                    seed: *seed,
                    expected_regret: episode.report.expected_regret,
                    realized_regret: episode.report.realized_regret,
                    benchmark_cost: episode.report.benchmark_cost,
                    total_oracle_calls: episode.report.total_oracle_calls,
                };
                Ok((summary, checks))
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })??;

    let mut runs = Vec::with_capacity(results.len());
    let mut checks = Vec::new();
    for (summary, c) in results {
        runs.push(summary);
        checks.extend(c);
    }
    let finals: Vec<(String, String, f64)> =
        runs.iter().map(|r| (r.learner.clone(), r.adversary.clone(), r.expected_regret)).collect();
    let outcome = RunOutcome {
        trace_schema_version: TRACE_SCHEMA_VERSION,
        table: regret_table(&finals),
        runs,
        checks: VerificationReport::new(checks),
    };
    write_json(&out_dir.join("summary.json"), &outcome)?;

    // Where and how wide a run executed is not part of the experiment.
    let mut echoed = config.clone();
    echoed.out_dir = Default::default();
    echoed.jobs = 0;
    let manifest = Manifest {
        trace_schema_version: TRACE_SCHEMA_VERSION,
        master_seed: config.master_seed,
        run_seeds: &seeds,
        traces: outcome.runs.iter().map(|r| format!("traces/{}.csv", r.run_id)).collect(),
        config: echoed,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(outcome)
}
