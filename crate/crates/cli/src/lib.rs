//! Experiment harness for the `qcldpc` library.
//!
//! Every command is deterministic under `--seed`. Tables are CSV with a
//! leading `# qcldpc <table> v<N>` schema line; reports are JSON. Logs go to
//! standard error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod report;
pub mod sweep;

#[derive(Debug, Parser)]
#[command(
    name = "qcldpc",
    version,
    about = "QC-LDPC reconciliation decoder experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a base matrix from a multi-edge degree distribution.
    Construct(ConstructArgs),
    /// Print the expanded parity-check support of a base matrix.
    Expand(ExpandArgs),
    /// Check a base matrix and/or degree distribution.
    Validate(ValidateArgs),
    /// Frame error rate sweep with and without the erase stage.
    FerSweep(FerSweepArgs),
    /// Decoder throughput estimates.
    Throughput(ThroughputArgs),
    /// Optimize the modulation variance for the key rate with both FER curves.
    SkrOpt(SkrArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ConstructArgs {
    /// Degree distribution file.
    #[arg(long)]
    pub dist: PathBuf,
    /// Code length.
    #[arg(long)]
    pub n: usize,
    /// Lifting size.
    #[arg(long)]
    pub z: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Base-matrix output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Girth search cap (even).
    #[arg(long, default_value_t = 12)]
    pub girth_cap: usize,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExpandArgs {
    /// Base-matrix file.
    #[arg(long)]
    pub code: PathBuf,
    /// JSON code statistics path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ValidateArgs {
    /// Base-matrix file.
    #[arg(long)]
    pub code: Option<PathBuf>,
    /// Degree distribution file.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub girth_cap: usize,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arith {
    Float,
    Fixed,
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arith::Float => "float",
            Arith::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FerSweepArgs {
    /// Base-matrix file.
    #[arg(long)]
    pub code: PathBuf,
    /// Explicit SNR points (linear), comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["snr_start", "snr_stop", "snr_step"])]
    pub snrs: Vec<f64>,
    #[arg(long, requires_all = ["snr_stop", "snr_step"])]
    pub snr_start: Option<f64>,
    #[arg(long)]
    pub snr_stop: Option<f64>,
    #[arg(long)]
    pub snr_step: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub frames: u64,
    #[arg(long, value_enum, default_value_t = Arith::Fixed)]
    pub arith: Arith,
    /// Fixed-point width; 8 and 10 imply their standard integer/fraction split.
    #[arg(long, default_value_t = 8)]
    pub width: u32,
    #[arg(long)]
    pub int_bits: Option<u32>,
    #[arg(long)]
    pub frac_bits: Option<u32>,
    /// Fraction bits of the Φ domain.
    #[arg(long)]
    pub phi_frac: Option<u32>,
    /// Reliability threshold in decoder units; backend default when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 13)]
    pub t_max: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Skip the erase stage.
    #[arg(long)]
    pub no_erase: bool,
    /// Erase strategy name.
    #[arg(long, default_value = "eliminate")]
    pub erase: String,
    #[arg(long, default_value_t = qcldpc::erasure::DEFAULT_MAX_FLIPS)]
    pub max_flips: usize,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ThroughputArgs {
    /// Base-matrix file.
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub f_mhz: f64,
    /// Parallelism (lanes per memory word).
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 13)]
    pub t_max: usize,
    /// Erase delay in decoding-iteration equivalents.
    #[arg(long, default_value_t = 0.0)]
    pub de_iterations: f64,
    #[arg(long, default_value_t = 2)]
    pub decoders: usize,
    /// Message width for the memory estimate.
    #[arg(long, default_value_t = 8)]
    pub width: u32,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Rate02,
    Rate01,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SkrArgs {
    /// One sweep: its raw column is the without-erase curve, its erased column the with-erase curve.
    #[arg(long, conflicts_with_all = ["with", "without"])]
    pub sweep: Option<PathBuf>,
    /// Sweep run with erase.
    #[arg(long, requires = "without")]
    pub with: Option<PathBuf>,
    /// Sweep run without erase.
    #[arg(long, requires = "with")]
    pub without: Option<PathBuf>,
    /// Link defaults for rate, distance and calibration point.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub distance_km: Option<f64>,
    /// Calibration: this modulation variance maps to `snr_ref`.
    #[arg(long)]
    pub va_ref: Option<f64>,
    #[arg(long)]
    pub snr_ref: Option<f64>,
    #[arg(long, default_value_t = qcldpc::skr::DEFAULT_XI)]
    pub xi: f64,
    #[arg(long, default_value_t = qcldpc::skr::DEFAULT_V_EL)]
    pub v_el: f64,
    #[arg(long, default_value_t = qcldpc::skr::DEFAULT_ALPHA_DB)]
    pub alpha_db: f64,
    /// Pulse rate for the real-time key rate, in Mpulse/s.
    #[arg(long)]
    pub throughput_mbps: Option<f64>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Infeasible = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ExitKind, source: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind,
            source: source.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<qcldpc::Error> for CliError {
    fn from(e: qcldpc::Error) -> Self {
        use qcldpc::Error as E;
        let kind = match &e {
            E::InvalidParameter(_) | E::UnknownStrategy { .. } => ExitKind::Usage,
            E::DegenerateFit(_) | E::NonPhysical(_) | E::Construction(_) => ExitKind::Infeasible,
            _ => ExitKind::Data,
        };
        CliError::new(kind, e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError::new(ExitKind::Usage, anyhow::anyhow!("{msg}"))
}

pub fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(ExitKind::Data, e)
}

pub fn infeasible(msg: impl fmt::Display) -> CliError {
    CliError::new(ExitKind::Infeasible, anyhow::anyhow!("{msg}"))
}

/// Parses `args` (including the program name), merging any `--config` file.
pub fn parse_args(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command();
    let merged = match config::merge(&cmd, args) {
        Ok(m) => m,
        Err(e) => {
            return Err(Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("{e:#}")))
        }
    };
    Cli::try_parse_from(merged)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Construct(a) => commands::construct(&a),
        Command::Expand(a) => commands::expand(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::FerSweep(a) => commands::fer_sweep(&a),
        Command::Throughput(a) => commands::throughput(&a),
        Command::SkrOpt(a) => commands::skr_opt(&a),
    }
}
