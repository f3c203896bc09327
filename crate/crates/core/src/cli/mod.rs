//! The `hse` command-line front end.
//!
//! Every subcommand reads and writes the file formats of the owning modules.
//! Outputs are written atomically and each gets a `<file>.meta.json` sidecar
//! with the tool version, the seed and the content hashes of its inputs.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or validation
//! errors. Failures print `error[<category>]: <message>` on standard error.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{resolve_seed, ProjectConfig, SEED_ENV};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Usage,
    Validation,
    Io,
    Simulation,
    Fit,
    Analysis,
    Integrity,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Validation => "validation",
            Category::Io => "io",
            Category::Simulation => "simulation",
            Category::Fit => "fit",
            Category::Analysis => "analysis",
            Category::Integrity => "integrity",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage | Category::Validation => 2,
            _ => 1,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self { category, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Category::Usage, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Category::Validation, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Category::Io, format!("{}: {e}", path.display()))
    }
}

impl From<crate::hyperspace::SpaceError> for CliError {
    fn from(e: crate::hyperspace::SpaceError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<crate::dove::DoveError> for CliError {
    fn from(e: crate::dove::DoveError) -> Self {
        use crate::dove::DoveError as E;
        let cat = match e {
            E::Io(_) => Category::Io,
            _ => Category::Validation,
        };
        Self::new(cat, e.to_string())
    }
}

impl From<crate::runner::StoreError> for CliError {
    fn from(e: crate::runner::StoreError) -> Self {
        use crate::runner::StoreError as E;
        let cat = match e {
            E::Io(_) => Category::Io,
            E::Schema(_) => Category::Validation,
            E::Duplicate(_) | E::PlanMismatch { .. } => Category::Integrity,
        };
        Self::new(cat, e.to_string())
    }
}

impl From<crate::runner::RunError> for CliError {
    fn from(e: crate::runner::RunError) -> Self {
        use crate::runner::RunError as E;
        match e {
            E::Store(s) => s.into(),
            E::TooManyFailures { .. } => Self::new(Category::Simulation, e.to_string()),
            E::Options(_) => Self::usage(e.to_string()),
            E::PlanMismatch { .. } | E::SpaceMismatch { .. } => Self::new(Category::Integrity, e.to_string()),
        }
    }
}

impl From<crate::surrogate::FitError> for CliError {
    fn from(e: crate::surrogate::FitError) -> Self {
        use crate::surrogate::FitError as E;
        let cat = match e {
            E::InvalidArgument(_) => Category::Usage,
            _ => Category::Fit,
        };
        Self::new(cat, e.to_string())
    }
}

impl From<crate::surrogate::PredictError> for CliError {
    fn from(e: crate::surrogate::PredictError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<crate::analysis::AnalysisError> for CliError {
    fn from(e: crate::analysis::AnalysisError) -> Self {
        use crate::analysis::AnalysisError as E;
        let cat = match e {
            E::UnknownVariable(_) | E::UnknownTarget(_) | E::InvalidArgument(_) | E::Arity { .. } => {
                Category::Validation
            }
            E::Predict(_) => Category::Validation,
            _ => Category::Analysis,
        };
        Self::new(cat, e.to_string())
    }
}

impl From<crate::meta::RefineError> for CliError {
    fn from(e: crate::meta::RefineError) -> Self {
        use crate::meta::RefineErrorKind as K;
        let n = e.trace.len();
        let inner: CliError = match e.kind {
            K::Policy(m) => CliError::validation(m),
            K::Run(r) => r.into(),
            K::Fit(f) => f.into(),
            K::Plan(p) => p.into(),
            K::Analysis(a) => a.into(),
        };
        CliError::new(inner.category, format!("refinement stopped after {n} assessments: {}", inner.message))
    }
}

#[derive(Debug, Parser)]
#[command(name = "hse", version, about = "Hyper space exploration: plan, simulate, fit, analyze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check or export hyper space documents.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Build an experiment plan.
    Plan(PlanArgs),
    /// Evaluate a plan with a simulator.
    Run(RunArgs),
    /// Fit a surrogate model to results.
    Fit(FitArgs),
    /// Extract a Pareto front from results or a model.
    Pareto(ParetoArgs),
    /// Best/worst-case envelope of a target against one swept variable.
    Potential(PotentialArgs),
    /// Run the accuracy-gated refinement loop of a project.
    Refine(RefineArgs),
    /// Rank surrogate configurations by (LOOCV error, parameter count).
    MetaOpt(MetaOptArgs),
    /// Write CSVs, SVG charts and a summary for a project.
    Report(ReportArgs),
    /// Serve a builtin simulator over the line protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpaceCommand {
    /// Exit 0 iff the document parses and has no violations.
    Validate { file: PathBuf },
    /// Write the space of a builtin exemplar (`fev` or `yaw`).
    Builtin {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlanMethodArg {
    Lhs,
    Maximin,
    Factorial,
    Montecarlo,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, value_enum, default_value = "lhs")]
    pub method: PlanMethodArg,
    /// Number of runs; defaults to ten per input.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Levels per continuous variable (factorial).
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Candidate LHS designs (maximin).
    #[arg(long, default_value_t = 20)]
    pub candidates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// `builtin:<fev|yaw|echo>` or `exec:<command>`.
    #[arg(long)]
    pub sim: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub max_failures: f64,
    /// Continue a partially written results file.
    #[arg(long)]
    pub resume: bool,
    /// Per-run timeout for `exec:` simulators, seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poly,
    Kriging,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    #[arg(long)]
    pub nugget: Option<f64>,
    /// One model over all categories instead of one per category.
    #[arg(long)]
    pub joint: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Validation,
    Bounds,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `name=value,...`; a selection for results, the evaluated use case for a model.
    #[arg(long)]
    pub use_case: Option<String>,
    /// `name=value,...` design conditions; selects results or fixes grid axes.
    #[arg(long = "where")]
    pub filter: Option<String>,
    /// Comma-separated target names (default: all).
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long, default_value_t = 21)]
    pub levels: usize,
    #[arg(long, value_enum, default_value = "validation")]
    pub domain: DomainArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub tradeoff: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, conflicts_with = "results", required_unless_present = "results")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub sweep: String,
    /// `lower:upper:steps`.
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub group_by: Option<String>,
    #[arg(long, default_value_t = crate::analysis::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `refine/` next to the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetaOptArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub project: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// `fev`, `yaw` or `echo`.
    #[arg(long)]
    pub sim: String,
    /// Required for `echo`.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("error[usage]: {e}");
            return Category::Usage.exit_code();
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.category.exit_code()
        }
    }
}
