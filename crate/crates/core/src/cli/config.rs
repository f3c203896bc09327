//! Project configuration for `refine` and `report`.
//!
//! A JSON document; relative paths resolve against the document's directory.
//!
//! ```json
//! {
//!   "space": "space.json",
//!   "plan": "plan.csv",
//!   "results": "results.csv",
//!   "model": "model.json",
//!   "simulator": "builtin:fev",
//!   "seed": 7,
//!   "n": 128,
//!   "model_spec": { "family": "polynomial", "degree": 2 },
//!   "policy": { "accuracy_threshold": 0.05 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::meta::RefinementPolicy;
use crate::surrogate::ModelSpec;

pub const SEED_ENV: &str = "HSE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub space: PathBuf,
    pub plan: PathBuf,
    pub results: PathBuf,
    pub model: PathBuf,
    /// `builtin:<name>`, a bare builtin name, or `exec:<command>`.
    pub simulator: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Plan size; defaults to ten runs per input.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_model_spec")]
    pub model_spec: ModelSpec,
    #[serde(default)]
    pub policy: RefinementPolicy,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_max_failures")]
    pub max_failures: f64,
    /// Per-run timeout for `exec:` simulators, seconds.
    #[serde(default)]
    pub timeout_s: Option<f64>,
    #[serde(default)]
    pub report: ReportSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSettings {
    /// Front targets; all targets when empty. The plot uses the first two.
    #[serde(default)]
    pub targets: Vec<String>,
    /// Observed fronts per label of this categorical design variable.
    #[serde(default)]
    pub compare_by: Option<String>,
    /// `name=value,...` for the surrogate front; required when the space
    /// has use-case variables.
    #[serde(default)]
    pub use_case: Option<String>,
    #[serde(default)]
    pub potential: Option<PotentialSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSettings {
    pub sweep: String,
    /// `lower:upper:steps`.
    pub grid: String,
    pub target: String,
    #[serde(default)]
    pub group_by: Option<String>,
    #[serde(default)]
    pub samples: Option<usize>,
}

fn default_method() -> String {
    "lhs".into()
}

fn default_model_spec() -> ModelSpec {
    ModelSpec::polynomial(2)
}

fn default_jobs() -> usize {
    1
}

fn default_max_failures() -> f64 {
    0.5
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.space, &mut cfg.plan, &mut cfg.results, &mut cfg.model] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Seed precedence: command-line flag, then `HSE_SEED`, then configuration,
/// then zero.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            v.trim().parse().map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))
        }
        Err(_) => Ok(config.unwrap_or(0)),
    }
}
