//! Command-line front end: scenario files in, CSV tables and a `run.json`
//! manifest out.

mod output;
mod verbs;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use mesodyn::fixed::SolverTag;

pub use output::{CheckStatus, RunManifest};
pub use verbs::run;

/// Environment variable that replaces the scenario's `pd_floor`.
pub const PD_FLOOR_ENV: &str = "MESODYN_PD_FLOOR";
pub const DEFAULT_TERMS: usize = 30;
pub const DEFAULT_SEED: u64 = mesodyn::verify::DEFAULT_SEED;
pub const MANIFEST_NAME: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Simulate,
    Compare,
    Critical,
    Moving,
    Flux,
    Verify,
}

impl Verb {
    pub fn needs_config(self) -> bool {
        self != Verb::Verify
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Simulate => "simulate",
            Verb::Compare => "compare",
            Verb::Critical => "critical",
            Verb::Moving => "moving",
            Verb::Flux => "flux",
            Verb::Verify => "verify",
        }
    }
}

/// Values that replace fields of the loaded scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub hbar: Option<f64>,
    pub solver: Option<SolverTag>,
    pub seed: u64,
    pub terms: usize,
    pub pd_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub verb: Verb,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Overrides,
    /// `moving` only: use the coefficient formula without the polar unitary.
    pub literal_atime: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "mesodyn",
    version,
    about = "Solvers and diagnostics for the mesoscopic operator equation"
)]
struct Args {
    #[arg(value_enum)]
    verb: Verb,
    /// Scenario file (JSON). Required for every verb except `verify`.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV outputs and run.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    output: PathBuf,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverTag>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Number of power-series terms.
    #[arg(long, default_value_t = DEFAULT_TERMS)]
    terms: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    literal_atime: bool,
}

fn parse_solver(s: &str) -> Result<SolverTag, String> {
    s.parse().map_err(|e: mesodyn::Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// `--help` or `--version`; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    NearSingular(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 2,
            CliError::ConfigInvalid(_) => 3,
            CliError::NearSingular(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<mesodyn::Error> for CliError {
    /// Rank loss becomes exit 4; every other library error means the inputs
    /// cannot be run as given.
    fn from(e: mesodyn::Error) -> Self {
        match e {
            mesodyn::Error::NearSingular { .. } | mesodyn::Error::RankDeficient { .. } => {
                CliError::NearSingular(e.to_string())
            }
            other => CliError::ConfigInvalid(other.to_string()),
        }
    }
}

/// Parses arguments (without the program name), reading the pd_floor
/// override from the environment.
pub fn parse_command<I, S>(argv: I) -> Result<Command, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let env = std::env::var(PD_FLOOR_ENV).ok();
    parse_command_with_env(argv, env.as_deref())
}

/// [`parse_command`] with the environment value passed in explicitly.
pub fn parse_command_with_env<I, S>(
    argv: I,
    pd_floor_env: Option<&str>,
) -> Result<Command, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("mesodyn".to_owned()).chain(argv.into_iter().map(Into::into));
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Info(e.to_string())
        }
        _ => CliError::Usage(e.render().to_string()),
    })?;
    if args.verb.needs_config() && args.config.is_none() {
        return Err(CliError::Usage(format!(
            "`{}` requires --config PATH",
            args.verb.as_str()
        )));
    }
    let pd_floor = match pd_floor_env.map(str::trim) {
        None | Some("") => None,
        Some(text) => Some(text.parse::<f64>().map_err(|_| {
            CliError::Usage(format!("{PD_FLOOR_ENV} must be a number, got '{text}'"))
        })?),
    };
    Ok(Command {
        verb: args.verb,
        config_path: args.config,
        output_dir: args.output,
        overrides: Overrides {
            dt: args.dt,
            t_end: args.t_end,
            hbar: args.hbar,
            solver: args.solver,
            seed: args.seed,
            terms: args.terms,
            pd_floor,
        },
        literal_atime: args.literal_atime,
    })
}
