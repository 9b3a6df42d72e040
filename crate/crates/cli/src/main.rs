mod cache;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use phaseshift::detect::Method;
use phaseshift::signals::CouplingForm;
use phaseshift::Error;

/// Phase-shift simulation, detection, calibration and evaluation.
#[derive(Debug, Parser)]
#[command(name = "phaseshift", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Global seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML (or JSON) run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Cache for null tables and critical values; defaults to $PHASESHIFT_CACHE_DIR.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Noisy oscillator with a random phase-shift schedule.
    SimulateOscillator(SimulateOscillatorArgs),
    /// Two coupled Rössler attractors with Poincaré-phase ground truth.
    SimulateRossler(SimulateRosslerArgs),
    /// Demodulate a CSV signal and detect phase shifts.
    Detect(DetectArgs),
    /// Calibrate burn-in, segment lengths, critical values or power.
    Calibrate(CalibrateArgs),
    /// Score detections against ground truth, or run a built-in benchmark.
    Evaluate(EvaluateArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateOscillatorArgs {
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub shifts: Option<usize>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub delta_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingArg {
    SelfMinusOther,
    Diffusive,
}

impl From<CouplingArg> for CouplingForm {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::SelfMinusOther => CouplingForm::SelfMinusOther,
            CouplingArg::Diffusive => CouplingForm::Diffusive,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateRosslerArgs {
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub delta_omega: Option<f64>,
    #[arg(long, value_enum)]
    pub coupling_form: Option<CouplingArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    /// CSV with header `index,time_s,<channels...>`.
    #[arg(long)]
    pub input: PathBuf,
    /// One channel, or two for their phase difference; the first column when omitted.
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    /// The channels already hold phase in radians.
    #[arg(long)]
    pub phase_input: bool,
    /// Significance levels to run; `--alpha` (or the config) when omitted.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationKind {
    Nburn,
    Nmin,
    Isimin,
    Critical,
    Power,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub kind: CalibrationKind,
    /// Replicates per evaluated candidate.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Analysed samples per replicate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Power grid, e.g. `snr=-5..20,delta=0.05..3.14` (five points per axis).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    /// Noisy oscillators, all four methods.
    Oscillator,
    /// Coupled Rössler attractors, nonparametric methods.
    Rossler,
    /// Inter-shift intervals of long Rössler runs.
    RosslerIsi,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Detection JSON files, paired in order with `--truth`.
    #[arg(long)]
    pub events: Vec<PathBuf>,
    #[arg(long)]
    pub truth: Vec<PathBuf>,
    /// JSON array of stimulus times in seconds.
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with_all = ["events", "truth"])]
    pub benchmark: Option<Benchmark>,
    /// Number of datasets for `--benchmark`.
    #[arg(long)]
    pub datasets: Option<usize>,
}

/// Exit status for an error: 2 configuration, 3 I/O and input format,
/// 4 numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::TooShort { .. } | Error::Numerical(_) | Error::Unreachable(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
