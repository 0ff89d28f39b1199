//! The `summarize` subcommand: regret table and plot-ready curves from traces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::run::{TRACE_HEADER, TRACE_SCHEMA_VERSION};
use crate::{write_json, BenchError};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Final expected regret across seeds for one learner x adversary pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub learner: String,
    pub adversary: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator), 0 when `n = 1`.
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when only one seed ran, so the interval has zero width by fiat.
    pub single_seed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trace_schema_version: u32,
    pub table: Vec<RegretRow>,
}

fn row(learner: &str, adversary: &str, values: &[f64]) -> RegretRow {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = Z95 * sd / (n as f64).sqrt();
    RegretRow {
        learner: learner.to_string(),
        adversary: adversary.to_string(),
        n,
        mean,
        sd,
        ci_low: mean - half,
        ci_high: mean + half,
        single_seed: n == 1,
    }
}

/// Groups `(learner, adversary, regret)` triples, ordered by name.
pub fn regret_table(finals: &[(String, String, f64)]) -> Vec<RegretRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for (l, a, v) in finals {
        groups.entry((l, a)).or_default().push(*v);
    }
    groups.into_iter().map(|((l, a), v)| row(l, a, &v)).collect()
}

#[derive(Deserialize)]
struct ManifestHead {
    trace_schema_version: u32,
}

fn locate(dir: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
    // Accept either the run's output directory or its traces/ subdirectory.
    for root in [dir.to_path_buf(), dir.join("..")] {
        let manifest = root.join("manifest.json");
        if manifest.is_file() {
            return Ok((root.clone(), root.join("traces")));
        }
    }
    Err(BenchError::Schema(format!("no manifest.json in or above {}", dir.display())))
}

/// Reads every trace under `dir` and writes `regret_table.csv` and
/// `regret_curves.csv` (mean cumulative expected regret and its 95% interval
/// per learner, adversary and round) next to the manifest.
pub fn summarize(dir: &Path) -> Result<Summary, BenchError> {
    let (root, traces) = locate(dir)?;
    let head: ManifestHead = serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json"))?)
        .map_err(|e| BenchError::Schema(format!("manifest: {e}")))?;
    if head.trace_schema_version != TRACE_SCHEMA_VERSION {
        return Err(BenchError::Schema(format!(
            "traces have schema version {}, this build reads version {TRACE_SCHEMA_VERSION}",
            head.trace_schema_version
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&traces)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(BenchError::Schema(format!("no traces in {}", traces.display())));
    }

    let mut finals = Vec::new();
    // (learner, adversary) -> per-round regrets across runs.
    let mut curves: BTreeMap<(String, String), Vec<Vec<f64>>> = BTreeMap::new();
    for path in &files {
        let mut reader = csv::Reader::from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != TRACE_HEADER {
            return Err(BenchError::Schema(format!("{}: header {header:?} is not schema version {TRACE_SCHEMA_VERSION}", path.display())));
        }
        let mut key = None;
        let mut regrets = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            key.get_or_insert_with(|| (rec[1].to_string(), rec[2].to_string()));
            let v: f64 = rec[9].parse().map_err(|e| BenchError::Schema(format!("{}: cum_expected_regret: {e}", path.display())))?;
            regrets.push(v);
        }
        let Some((learner, adversary)) = key else { continue };
        finals.push((learner.clone(), adversary.clone(), *regrets.last().expect("nonempty trace")));
        curves.entry((learner, adversary)).or_default().push(regrets);
    }

    let table = regret_table(&finals);
    let mut w = csv::Writer::from_path(root.join("regret_table.csv"))?;
    w.write_record(["learner", "adversary", "n", "mean", "sd", "ci_low", "ci_high", "single_seed"])?;
    for r in &table {
        w.write_record([
            r.learner.clone(),
            r.adversary.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.single_seed.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(root.join("regret_curves.csv"))?;
    w.write_record(["learner", "adversary", "t", "n", "mean_cum_regret", "ci_low", "ci_high"])?;
    for ((learner, adversary), runs) in &curves {
        let horizon = runs.iter().map(Vec::len).min().unwrap_or(0);
        for t in 0..horizon {
            let at: Vec<f64> = runs.iter().map(|r| r[t]).collect();
            let r = row(learner, adversary, &at);
            w.write_record([
                learner.clone(),
                adversary.clone(),
                (t + 1).to_string(),
                r.n.to_string(),
                r.mean.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let summary = Summary { trace_schema_version: TRACE_SCHEMA_VERSION, table };
    write_json(&root.join("regret_table.json"), &summary)?;
    Ok(summary)
}
