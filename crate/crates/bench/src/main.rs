use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use relaxcb_bench::{run_checks, run_experiment, summarize, BenchError, CheckKind, Config};

#[derive(Parser)]
#[command(name = "relaxcb", version, about = "Oracle-efficient contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every learner against every adversary and write per-round traces.
    Run(Common),
    /// Check admissibility, oracle budgets and regret bounds numerically.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of oracle-budget, admissibility, final-step, rademacher, regret.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
    },
    /// Aggregate the traces of a previous run into a regret table and curves.
    Summarize {
        /// Output directory of `run` (or its traces/ subdirectory).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Overrides `jobs`.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(relaxcb_bench::Resolved, PathBuf, usize), BenchError> {
        let mut config = Config::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        let out = config.out_dir.clone();
        let jobs = config.jobs;
        Ok((config.resolve()?, out, jobs))
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run(common) => {
            let (resolved, out, jobs) = common.load()?;
            let outcome = run_experiment(&resolved, &out, jobs)?;
            for row in &outcome.table {
                println!(
                    "{:<20} {:<22} n={:<4} mean={:>10.4} sd={:>9.4} ci=[{:.4}, {:.4}]{}",
                    row.learner,
                    row.adversary,
                    row.n,
                    row.mean,
                    row.sd,
                    row.ci_low,
                    row.ci_high,
                    if row.single_seed { " (single seed)" } else { "" }
                );
            }
            report_checks(&outcome.checks.checks, false);
            println!("wrote {} traces to {}", outcome.runs.len(), out.join("traces").display());
            Ok(exit_for(outcome.checks.all_pass))
        }
        Command::Verify { common, checks } => {
            let (resolved, out, jobs) = common.load()?;
            let selected = checks
                .map(|names| names.iter().map(|n| CheckKind::parse(n)).collect::<Result<Vec<_>, _>>())
                .transpose()?;
            let report = run_checks(&resolved, selected.as_deref(), jobs)?;
            report_checks(&report.checks, true);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("verification.json");
            std::fs::write(&path, report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
            println!("report written to {}", path.display());
            Ok(exit_for(report.all_pass))
        }
        Command::Summarize { out } => {
            let summary = summarize(Path::new(&out))?;
            println!("learner,adversary,n,mean,sd,ci_low,ci_high,single_seed");
            for r in &summary.table {
                println!("{},{},{},{},{},{},{},{}", r.learner, r.adversary, r.n, r.mean, r.sd, r.ci_low, r.ci_high, r.single_seed);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report_checks(checks: &[relaxcb::verify::CheckReport], all: bool) {
    for c in checks.iter().filter(|c| all || !c.pass) {
        println!(
            "{} {:<40} lhs={:.6} rhs={:.6} se={:.2e} n={}{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.lhs,
            c.rhs,
            c.se,
            c.n,
            if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) }
        );
    }
}

fn exit_for(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<BenchError>().map_or(1, BenchError::exit_code);
            ExitCode::from(code)
        }
    }
}
