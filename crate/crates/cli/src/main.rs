mod commands;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use urec::config::{default_r_schedule, geometric_r_schedule};
use urec::{ErrorKind, Tolerances};

#[derive(Debug)]
pub enum CliError {
    Core(urec::Error),
    Input(String),
    Io(String),
}

impl From<urec::Error> for CliError {
    fn from(e: urec::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.kind() == ErrorKind::Numerical => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "urec", version, about = "Recurrence statistics of monitored unitary evolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moments, transforms and classification of a spectral measure.
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// Monitored first-return run of a unitary system.
    Simulate(SimulateArgs),
    /// Zeros, winding number, variance and feasibility of a Schur function.
    Schur(SchurArgs),
    /// Classical renewal and SJK quantities of a Markov chain.
    Markov(MarkovArgs),
    /// Coined quantum walks.
    Walk {
        #[command(subcommand)]
        mode: WalkMode,
    },
}

#[derive(Subcommand)]
enum MeasureAction {
    /// `--N` moments, `--grid` boundary density samples; `--tol` sets the radial tolerance.
    Analyze(MeasureArgs),
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Truncation order.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Command-specific tolerance override.
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON file with tolerance overrides (unknown keys rejected).
    #[arg(long)]
    pub tolerances: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Number of grid points for boundary sampling or scans.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Radial schedule: `first:last` for `r_k = 1 - 2^-k`, or comma-separated radii.
    #[arg(long)]
    pub r_schedule: Option<String>,
}

impl Common {
    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        match &self.tolerances {
            Some(p) => read_json(p),
            None => Ok(Tolerances::default()),
        }
    }

    pub fn n_or(&self, default: usize) -> Result<usize, CliError> {
        let n = self.n.unwrap_or(default);
        if n < 1 {
            return Err(CliError::Input("--N must be at least 1".into()));
        }
        Ok(n)
    }

    pub fn grid_or(&self, default: usize) -> Result<usize, CliError> {
        let g = self.grid.unwrap_or(default);
        if g < 1 {
            return Err(CliError::Input("--grid must be at least 1".into()));
        }
        Ok(g)
    }

    pub fn schedule(&self) -> Result<Vec<f64>, CliError> {
        let Some(s) = &self.r_schedule else { return Ok(default_r_schedule()) };
        let bad = || CliError::Input(format!("cannot parse --r-schedule {s:?}"));
        let radii = if let Some((a, b)) = s.split_once(':') {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            if a > b || b > 52 {
                return Err(bad());
            }
            geometric_r_schedule(a, b)
        } else {
            s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?
        };
        if radii.iter().any(|r| !(0.0..1.0).contains(r)) || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Input("radii must increase strictly inside (0, 1)".into()));
        }
        Ok(radii)
    }
}

#[derive(Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct SystemInput {
    /// Measure JSON; runs the canonical multiplication system.
    #[arg(long, group = "input")]
    pub measure: Option<PathBuf>,
    /// System JSON `{"U": [[[re, im], ...], ...], "phi": [[re, im], ...]}`.
    #[arg(long, group = "input")]
    pub system: Option<PathBuf>,
}

/// `--tol` sets the survival tolerance below which the run counts as returned.
#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: SystemInput,
    #[command(flatten)]
    pub common: Common,
}

/// `--N` Taylor/Verblunsky order, `--grid` initial boundary grid; `--tol` sets the inner tolerance.
#[derive(Args)]
pub struct SchurArgs {
    #[arg(long)]
    pub schur: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

/// `--tol` sets the relative tail threshold of the divergence test.
#[derive(Args)]
pub struct MarkovArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DomainArg {
    HalfLine,
    Line,
}

#[derive(Args, Clone)]
pub struct Gamma {
    /// Real part of the coin parameter.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_im: f64,
}

#[derive(Subcommand)]
enum WalkMode {
    /// Closed-form return probability of a constant coin; `--N` adds the amplitude series.
    ConstantCoin {
        #[command(flatten)]
        gamma: Gamma,
        #[arg(long, value_enum)]
        domain: DomainArg,
        #[command(flatten)]
        common: Common,
    },
    /// Monitored run of a walk from a basis state; `--tol` sets the survival tolerance.
    Cmv {
        #[arg(long)]
        walk: PathBuf,
        /// Start index `2x + spin`.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Return probability from the momentum-space symbol of a line walk.
    Fourier {
        #[command(flatten)]
        gamma: Gamma,
        /// Symbol JSON, instead of `--gamma`.
        #[arg(long, conflicts_with = "gamma")]
        symbol: Option<PathBuf>,
        /// Internal state `re,im;re,im`; defaults to spin up.
        #[arg(long, conflicts_with = "theta")]
        state: Option<String>,
        /// Internal state `(1, e^{i theta})/sqrt 2`.
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// `R(theta)` for `(1, e^{i theta})/sqrt 2` over `--grid` phases.
    PhaseScan {
        #[command(flatten)]
        gamma: Gamma,
        #[arg(long, conflicts_with = "gamma")]
        symbol: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("UREC_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| CliError::Input(format!("UREC_THREADS={v:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Measure { action: MeasureAction::Analyze(a) } => commands::measure_analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Schur(a) => commands::schur(&a),
        Command::Markov(a) => commands::markov(&a),
        Command::Walk { mode } => match mode {
            WalkMode::ConstantCoin { gamma, domain, common } => commands::walk_constant_coin(&gamma, domain, &common),
            WalkMode::Cmv { walk, start, common } => commands::walk_cmv(&walk, start, &common),
            WalkMode::Fourier { gamma, symbol, state, theta, common } => {
                commands::walk_fourier(&gamma, symbol.as_deref(), state.as_deref(), theta, &common)
            }
            WalkMode::PhaseScan { gamma, symbol, common } => commands::walk_phase_scan(&gamma, symbol.as_deref(), &common),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
