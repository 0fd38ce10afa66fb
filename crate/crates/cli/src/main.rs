//! `lppls`: batch front end for bubble detection with the LPPLS model.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_COMPUTATION: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct AppError {
    pub code: u8,
    pub message: String,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn computation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPUTATION,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<lppls_core::Error> for AppError {
    fn from(e: lppls_core::Error) -> Self {
        use lppls_core::Error as E;
        let code = match e {
            E::FitFailed(_) | E::DegenerateBasis { .. } => EXIT_COMPUTATION,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lppls",
    version,
    about = "Detect LPPLS bubble signatures in price series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Named flags override `--set` pairs,
/// which override the config file, which overrides built-in defaults.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// Flat `key = value` config file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Set any config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Input CSV with `date` and `close` columns
    #[arg(long)]
    input: Option<String>,
    /// Output file; standard output when absent
    #[arg(long)]
    output: Option<String>,
    /// Resampling stride applied after ingestion (5 weekly, 21 monthly)
    #[arg(long)]
    stride: Option<String>,
    /// Worker threads; 0 uses LPPLS_WORKERS or the available parallelism
    #[arg(long)]
    workers: Option<String>,
}

impl Common {
    fn load(&self, extra: &[(&str, Option<String>)]) -> Result<RunConfig, AppError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| AppError::usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            cfg.set(k, v)?;
        }
        let named = [
            ("input", self.input.clone()),
            ("output", self.output.clone()),
            ("stride", self.stride.clone()),
            ("workers", self.workers.clone()),
        ];
        for (k, v) in named.iter().chain(extra) {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.resolve();
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a price CSV and write it back in normalised form
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Keep every `stride`-th point, anchored at the last observation
    Resample {
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic LPPLS trajectory
    Synth(commands::SynthArgs),
    /// Calibrate one window and run the filters on the fit
    Fit(commands::FitArgs),
    /// Confidence indicators over a range of endpoints
    Scan(commands::ScanArgs),
    /// Classify a crash from an indicator table
    Classify(commands::ClassifyArgs),
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest { common } => commands::ingest(&common.load(&[])?, None),
        Command::Resample { common } => {
            let cfg = common.load(&[])?;
            commands::ingest(&cfg, Some(cfg.stride))
        }
        Command::Synth(args) => commands::synth(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Scan(args) => commands::scan(&args),
        Command::Classify(args) => commands::classify(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
