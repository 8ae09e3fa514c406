//! Command-line flags, the optional JSON config file, and their merge.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use multistop::multiple::DEFAULT_MEMO_CAP;
use multistop::single::EPS_EQ;
use multistop::stopping::DEFAULT_CAP;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "solve", version, about = "Optimal single and multiple stopping on finite event trees")]
pub struct Cli {
    #[command(subcommand)]
    pub mode: Mode,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Single stopping: Snell envelope, minimal optimal stop, λ-table
    Single,
    /// d-fold stopping through the nested reduction
    Multi,
    /// Ordered backward induction for a symmetric reward
    Symmetric,
    /// Swing option with d rights and refraction δ
    Swing,
    /// Run a solver and check it against brute-force enumeration
    Certify,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Multi => "multi",
            Mode::Symmetric => "symmetric",
            Mode::Swing => "swing",
            Mode::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Model spec (JSON)
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Start node id (defaults to the root)
    #[arg(long, global = true)]
    pub start: Option<String>,

    /// Name of the reward process declared in the model file
    #[arg(long, global = true)]
    pub reward: Option<String>,

    /// Multi-reward: additive | multiplicative | zero | table:<csv path>
    #[arg(long, global = true)]
    pub psi: Option<String>,

    /// Number of stopping components / exercise rights
    #[arg(long, global = true)]
    pub d: Option<usize>,

    /// Refraction in tree steps (swing only)
    #[arg(long, global = true)]
    pub delta: Option<usize>,

    /// λ values for the approximation table (single only)
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Oracle enumeration cap (tuples)
    #[arg(long, global = true)]
    pub cap_tuples: Option<u128>,

    /// Memo table cap for the nested solvers (entries)
    #[arg(long, global = true)]
    pub memo_cap: Option<usize>,

    /// Oracle wall-clock budget in seconds
    #[arg(long, global = true)]
    pub budget_secs: Option<f64>,

    /// Equality tolerance
    #[arg(long, global = true)]
    pub eps: Option<f64>,

    /// Solver checked by certify mode
    #[arg(long, global = true, value_enum)]
    pub solver: Option<Mode>,
}

/// Config file contents. Relative paths are resolved against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub model: Option<PathBuf>,
    pub start: Option<String>,
    pub reward: Option<String>,
    pub psi: Option<String>,
    pub d: Option<usize>,
    pub delta: Option<usize>,
    pub lambda: Option<Vec<f64>>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub cap_tuples: Option<u128>,
    pub memo_cap: Option<usize>,
    pub budget_secs: Option<f64>,
    pub eps: Option<f64>,
    pub solver: Option<Mode>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("config `{}`: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        rebase(&mut cfg.model);
        rebase(&mut cfg.out);
        if let Some(table) = cfg.psi.as_deref().and_then(|s| s.strip_prefix("table:")) {
            let p = Path::new(table);
            if p.is_relative() {
                cfg.psi = Some(format!("table:{}", base.join(p).display()));
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiSpec {
    Additive,
    Multiplicative,
    Zero,
    Table(PathBuf),
}

impl PsiSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "additive" => Ok(PsiSpec::Additive),
            "multiplicative" => Ok(PsiSpec::Multiplicative),
            "zero" => Ok(PsiSpec::Zero),
            _ => match s.strip_prefix("table:") {
                Some(path) if !path.is_empty() => Ok(PsiSpec::Table(PathBuf::from(path))),
                _ => Err(CliError::Config(format!(
                    "--psi `{s}`: expected additive, multiplicative, zero or table:<path>"
                ))),
            },
        }
    }

    pub fn needs_process(&self) -> bool {
        matches!(self, PsiSpec::Additive | PsiSpec::Multiplicative)
    }
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// Solver used in certify mode; equal to `mode` otherwise.
    pub solver: Mode,
    pub model: PathBuf,
    pub start: Option<String>,
    pub reward: Option<String>,
    pub psi: PsiSpec,
    pub d: usize,
    pub delta: usize,
    pub lambdas: Vec<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub cap_tuples: u128,
    pub memo_cap: usize,
    pub budget: Duration,
    pub eps: f64,
}

impl RunConfig {
    pub fn resolve(mode: Mode, flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(m) = file.mode {
            if m != mode {
                return Err(CliError::Config(format!(
                    "config file is for mode `{}` but `{}` was requested",
                    m.as_str(),
                    mode.as_str()
                )));
            }
        }
        let solver = match mode {
            Mode::Certify => flags.solver.or(file.solver).unwrap_or(Mode::Multi),
            other => {
                if flags.solver.is_some() {
                    return Err(CliError::Config("--solver is only valid in certify mode".into()));
                }
                other
            }
        };
        if solver == Mode::Certify {
            return Err(CliError::Config("--solver must name a solving mode".into()));
        }

        let model = flags
            .model
            .or(file.model)
            .ok_or_else(|| CliError::Config("--model is required".into()))?;
        let psi = match flags.psi.or(file.psi) {
            Some(s) => {
                if matches!(solver, Mode::Single | Mode::Swing) {
                    return Err(CliError::Config(format!(
                        "--psi is not used by {} mode; the reward is given by --reward",
                        solver.as_str()
                    )));
                }
                PsiSpec::parse(&s)?
            }
            None => PsiSpec::Additive,
        };
        let d = flags.d.or(file.d);
        let d = match solver {
            Mode::Single => match d {
                None | Some(1) => 1,
                Some(other) => return Err(CliError::Config(format!("--d {other}: single mode has d = 1"))),
            },
            _ => d.unwrap_or(2),
        };
        if d < 1 {
            return Err(CliError::Config("--d must be >= 1".into()));
        }
        let delta = flags.delta.or(file.delta);
        if delta.is_some() && solver != Mode::Swing {
            return Err(CliError::Config(format!(
                "--delta is only valid in swing mode (mode is {})",
                solver.as_str()
            )));
        }
        let lambdas = flags.lambda.or(file.lambda).unwrap_or_default();
        if !lambdas.is_empty() && solver != Mode::Single {
            return Err(CliError::Config("--lambda is only valid in single mode".into()));
        }
        for &l in &lambdas {
            if !(l > 0.0 && l < 1.0) {
                return Err(CliError::Config(format!("--lambda {l}: each λ must lie in (0, 1)")));
            }
        }
        let eps = flags.eps.or(file.eps).unwrap_or(EPS_EQ);
        if !(eps.is_finite() && eps > 0.0) {
            return Err(CliError::Config(format!("--eps {eps}: tolerance must be positive")));
        }
        let cap_tuples = flags.cap_tuples.or(file.cap_tuples).unwrap_or(DEFAULT_CAP);
        let memo_cap = flags.memo_cap.or(file.memo_cap).unwrap_or(DEFAULT_MEMO_CAP);
        if cap_tuples == 0 || memo_cap == 0 {
            return Err(CliError::Config("caps must be positive".into()));
        }
        let budget_secs = flags.budget_secs.or(file.budget_secs).unwrap_or(60.0);
        if !(budget_secs.is_finite() && budget_secs > 0.0) {
            return Err(CliError::Config(format!("--budget-secs {budget_secs}: budget must be positive")));
        }
        Ok(Self {
            mode,
            solver,
            model,
            start: flags.start.or(file.start),
            reward: flags.reward.or(file.reward),
            psi,
            d,
            delta: delta.unwrap_or(0),
            lambdas,
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            out: flags.out.or(file.out),
            cap_tuples,
            memo_cap,
            budget: Duration::from_secs_f64(budget_secs),
            eps,
        })
    }
}
