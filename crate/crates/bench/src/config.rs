//! The experiment file: one TOML document fixes every output byte.
//!
//! ```toml
//! horizon = 200
//! actions = 2
//! contexts = 2
//! master_seed = 1
//! seeds = 5
//! out_dir = "out"
//! jobs = 0                       # 0 = one worker per core
//! context_distribution = [0.5, 0.5]
//!
//! [policy_class]
//! kind = "random"                # or "exhaustive", "explicit" (with tables)
//! size = 4
//! seed = 7
//!
//! [[learner]]
//! name = "relax"
//! kind = "relax"                 # relax | full-rademacher | exp4 | epsilon-greedy
//! gamma = 0.3                    # optional; tuned from (T, K, |Pi|) when absent
//!
//! [[adversary]]
//! name = "mode"
//! kind = "punish-the-mode"       # see AdversaryConfig
//!
//! [verify]
//! checks = ["oracle-budget", "admissibility", "final-step", "rademacher", "regret"]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use relaxcb::envs::{builtin_adversaries, load_cost_csv, AdaptiveRule, AdversarySpec, ContextDistribution, NoiseLaw};
use relaxcb::learner::LearnerSpec;
use relaxcb::types::PolicyClass;
use relaxcb::verify::Mode;

use crate::BenchError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub horizon: usize,
    pub actions: usize,
    pub contexts: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub context_distribution: Option<Vec<f64>>,
    pub policy_class: PolicyClassConfig,
    #[serde(default, rename = "learner")]
    pub learners: Vec<LearnerConfig>,
    #[serde(default, rename = "adversary")]
    pub adversaries: Vec<AdversaryConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyClassConfig {
    Random { size: usize, seed: u64 },
    Exhaustive,
    Explicit { tables: Vec<Vec<usize>> },
}

// `deny_unknown_fields` does not combine with `flatten`; the flattened enums
// reject unknown kinds themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub name: String,
    #[serde(flatten)]
    pub spec: LearnerSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Every action costs the same shared Bernoulli(0.5) draw.
    Identical,
    Stochastic {
        means: Vec<Vec<f64>>,
        #[serde(default = "bernoulli")]
        noise: NoiseLaw,
    },
    /// `T` rows of `K` costs from a headerless CSV, relative to the config file.
    Fixed { path: PathBuf },
    PunishTheMode,
    PunishAboveUniform,
    BestPolicyChaser,
    /// Every built-in adversary, each under its own name.
    Builtin,
}

fn bernoulli() -> NoiseLaw {
    NoiseLaw::Bernoulli
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: AdversaryKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    OracleBudget,
    Admissibility,
    FinalStep,
    Rademacher,
    Regret,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] =
        [Self::OracleBudget, Self::Admissibility, Self::FinalStep, Self::Rademacher, Self::Regret];

    pub fn parse(name: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown check {name:?}; known: {}", Self::names())))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::OracleBudget => "oracle-budget",
            Self::Admissibility => "admissibility",
            Self::FinalStep => "final-step",
            Self::Rademacher => "rademacher",
            Self::Regret => "regret",
        }
    }

    fn names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

/// Parameters of the `verify` subcommand; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub checks: Vec<CheckKind>,
    /// Exploration rate of the checked learner; tuned when absent.
    pub gamma: Option<f64>,
    pub mode: Mode,
    pub n_outer: u64,
    pub n_inner: u64,
    pub final_samples: u64,
    pub rademacher_samples: u64,
    pub regret_seeds: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: CheckKind::ALL.to_vec(),
            gamma: None,
            mode: Mode::Auto,
            n_outer: 20_000,
            n_inner: 20_000,
            final_samples: 10_000,
            rademacher_samples: 10_000,
            regret_seeds: 50,
        }
    }
}

/// A validated config with every derived object built.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: Config,
    pub class: Arc<PolicyClass>,
    pub contexts: ContextDistribution,
    pub learners: Vec<(String, LearnerSpec)>,
    pub adversaries: Vec<(String, AdversarySpec)>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(format!("config: {e}")))
    }

    /// Reads a config file; relative CSV paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for adv in &mut config.adversaries {
            if let AdversaryKind::Fixed { path } = &mut adv.kind {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(config)
    }

    /// Cross-validates `T`, `K`, `X` and `|Pi|` and builds the run objects.
    pub fn resolve(&self) -> Result<Resolved, BenchError> {
        let cfg = |m: String| BenchError::Config(m);
        if self.horizon == 0 || self.actions == 0 || self.contexts == 0 {
            return Err(cfg("horizon, actions and contexts must be positive".into()));
        }
        if self.seeds == 0 {
            return Err(cfg("seeds must be at least 1".into()));
        }
        let class = match &self.policy_class {
            PolicyClassConfig::Random { size, seed } => PolicyClass::random(*size, self.contexts, self.actions, *seed),
            PolicyClassConfig::Exhaustive => PolicyClass::exhaustive(self.contexts, self.actions),
            PolicyClassConfig::Explicit { tables } => PolicyClass::from_tables(tables.clone(), self.actions),
        }
        .map_err(|e| cfg(format!("policy class: {e}")))?;
        if class.num_contexts() != self.contexts {
            return Err(cfg(format!("policy tables cover {} contexts, config says {}", class.num_contexts(), self.contexts)));
        }
        let contexts = match &self.context_distribution {
            Some(p) if p.len() != self.contexts => {
                return Err(cfg(format!("context_distribution has {} entries, expected {}", p.len(), self.contexts)))
            }
            Some(p) => ContextDistribution::new(p.clone()),
            None => ContextDistribution::uniform(self.contexts),
        }
        .map_err(|e| cfg(format!("context distribution: {e}")))?;

        let mut names = BTreeSet::new();
        let mut learners = Vec::new();
        for l in &self.learners {
            check_name(&l.name, &mut names)?;
            l.spec.resolved_gamma(self.horizon, &class).map_err(|e| cfg(format!("learner {}: {e}", l.name)))?;
            learners.push((l.name.clone(), l.spec.clone()));
        }

        let mut adversaries = Vec::new();
        for a in &self.adversaries {
            let named = |default: &str| a.name.clone().unwrap_or_else(|| default.to_string());
            let specs = match &a.kind {
                AdversaryKind::Builtin => builtin_adversaries(self.contexts, self.actions),
                AdversaryKind::Identical => vec![(
                    named("identical"),
                    AdversarySpec::Stochastic {
                        means: vec![vec![0.5; self.actions]; self.contexts],
                        noise: NoiseLaw::CommonBernoulli,
                    },
                )],
                AdversaryKind::Stochastic { means, noise } => {
                    vec![(named("stochastic"), AdversarySpec::Stochastic { means: means.clone(), noise: *noise })]
                }
                AdversaryKind::Fixed { path } => {
                    let rows = load_cost_csv(path, self.actions).map_err(|e| cfg(e.to_string()))?;
                    vec![(named("fixed"), AdversarySpec::FixedSequence(rows))]
                }
                AdversaryKind::PunishTheMode => vec![(named("punish-the-mode"), AdversarySpec::Adaptive(AdaptiveRule::PunishTheMode))],
                AdversaryKind::PunishAboveUniform => {
                    vec![(named("punish-above-uniform"), AdversarySpec::Adaptive(AdaptiveRule::PunishAboveUniform))]
                }
                AdversaryKind::BestPolicyChaser => {
                    vec![(named("best-policy-chaser"), AdversarySpec::Adaptive(AdaptiveRule::BestPolicyChaser))]
                }
            };
            for (name, spec) in specs {
                check_name(&name, &mut names)?;
                spec.validate(self.contexts, self.actions, self.horizon).map_err(|e| cfg(format!("adversary {name}: {e}")))?;
                adversaries.push((name, spec));
            }
        }
        Ok(Resolved { config: self.clone(), class: Arc::new(class), contexts, learners, adversaries })
    }
}

/// Names become file-name parts, so they are restricted and unique.
fn check_name(name: &str, seen: &mut BTreeSet<String>) -> Result<(), BenchError> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(BenchError::Config(format!("name {name:?} must be nonempty [A-Za-z0-9_-]")));
    }
    if !seen.insert(name.to_string()) {
        return Err(BenchError::Config(format!("duplicate learner/adversary name {name:?}")));
    }
    Ok(())
}
