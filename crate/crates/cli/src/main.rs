//! `ncva`: tuning, stability sweeps, frequency responses, simulation and self-checks for
//! delayed-resonator vibration absorption on mass-spring-damper chains.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 degenerate tuning (zero gain),
//! 3 simulation divergence, 4 `verify` found a failing check.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncva_core::Family;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ncva", version, about = "Delayed-resonator vibration absorption workbench")]
pub struct Cli {
    /// Chain description (JSON). Defaults to the built-in three-cart setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write results and manifest.json into this directory instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Gain and delay that silence the target at one frequency.
    Tune(TuneArgs),
    /// Admissible-frequency sweep with interval refinement and cross-target intersections.
    Sweep(SweepArgs),
    /// Disturbance-to-target amplitude response.
    Bode(BodeArgs),
    /// Time-domain run of a forcing/feedback schedule.
    Simulate(SimulateArgs),
    /// Tuning residuals, zero assignment, substructure roots and delay-free spectra.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Target mass (1-based); defaults to the config's `n`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Excitation frequency in Hz.
    #[arg(long = "f")]
    pub f_hz: f64,
    #[arg(long, default_value = "neg")]
    pub family: Family,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Targets, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Delay branches, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub k: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "neg")]
    pub family: Vec<Family>,
    #[arg(long, default_value_t = 2.0)]
    pub start: f64,
    #[arg(long, default_value_t = 12.0)]
    pub stop: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Endpoint refinement in Hz.
    #[arg(long, default_value_t = 0.01)]
    pub resolution: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Passive,
    Tuned,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Passive => "passive",
            Mode::Tuned => "tuned",
        })
    }
}

#[derive(Args, Debug)]
pub struct BodeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Passive)]
    pub mode: Mode,
    /// Design frequency in Hz (tuned mode).
    #[arg(long = "f")]
    pub f_hz: Option<f64>,
    #[arg(long, default_value = "neg")]
    pub family: Family,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[arg(long, default_value_t = 2.0)]
    pub start: f64,
    #[arg(long, default_value_t = 12.0)]
    pub stop: f64,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Evaluate a single frequency (Hz) instead of a curve.
    #[arg(long)]
    pub at: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's recording decimation.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Length (s) of the steady-state tail of each schedule window in the metrics.
    #[arg(long, default_value_t = 5.0)]
    pub tail: f64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Targets to check; defaults to every deployable target.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Design frequencies in Hz; defaults to 0.9 and 1.1 times the absorber's natural frequency.
    #[arg(long = "f", value_delimiter = ',')]
    pub f_hz: Vec<f64>,
}

/// Process exit status with the message to print.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const CONFIG: u8 = 1;
    pub const DEGENERATE: u8 = 2;
    pub const DIVERGENCE: u8 = 3;
    pub const VERIFY: u8 = 4;

    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(Failure::CONFIG, format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Failure::CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ncva: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
