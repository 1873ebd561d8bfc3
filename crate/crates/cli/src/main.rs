//! `sta-shuttle`: design and verify fast transport protocols from JSON job
//! configs.
//!
//! Exit status: 0 success, 2 configuration error, 3 physics error (escape),
//! 4 numerical-quality error, 1 filesystem failure.

mod commands;
mod config;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sta_shuttle::{io, Error, ErrorCategory};

use crate::commands::Outputs;
use crate::config::{CommandKind, JobConfig};

const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Parser)]
#[command(
    name = "sta-shuttle",
    version,
    about = "Shortcut-to-adiabaticity transport design and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Job config (JSON).
    #[arg(long, global = true, env = "STA_SHUTTLE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true, env = "STA_SHUTTLE_OUT")]
    out: Option<PathBuf>,

    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true, env = "STA_SHUTTLE_SEED")]
    seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "STA_SHUTTLE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Boundary-polynomial or Fourier-null trap path with a feasibility report.
    Design,
    /// Classical and/or quantum transport simulation.
    Simulate,
    /// Excitation spectrum and robustness window of a trap path.
    Spectrum,
    /// Noise sensitivity, spectral estimate or heating check.
    Noise,
    /// Constrained time-optimal or robustness-optimal design.
    Oct,
    /// Resumable scan over transport durations.
    Sweep,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Design => CommandKind::Design,
            Command::Simulate => CommandKind::Simulate,
            Command::Spectrum => CommandKind::Spectrum,
            Command::Noise => CommandKind::Noise,
            Command::Oct => CommandKind::Oct,
            Command::Sweep => CommandKind::Sweep,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Physics => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load(cli: &Cli, kind: CommandKind) -> Result<(JobConfig, PathBuf), Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::config("no job config given; pass --config or set STA_SHUTTLE_CONFIG"))?;
    let mut config = JobConfig::load(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    config.resolve(kind, cli.seed)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn finish(outputs: Outputs, config: &JobConfig, dir: &Path) -> Result<(), Failure> {
    outputs.write_all(dir)?;
    io::write_json(&dir.join(RESOLVED_CONFIG), config)?;
    for w in &outputs.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let kind = CommandKind::from(cli.command);
    let (config, dir) = load(cli, kind)?;
    let task = &config.task;
    let outputs = match kind {
        CommandKind::Design => commands::design(task, config.design.as_ref().expect("validated block"))?,
        CommandKind::Simulate => commands::simulate(task, config.simulate.as_ref().expect("validated block"))?,
        CommandKind::Spectrum => commands::spectrum(task, config.spectrum.as_ref().expect("validated block"))?,
        CommandKind::Noise => commands::noise(task, config.noise.as_ref().expect("validated block"))?,
        CommandKind::Oct => commands::oct(task, config.oct.as_ref().expect("validated block"))?,
        CommandKind::Sweep => {
            let job = config.sweep.as_ref().expect("validated block");
            let summary = sweep::sweep(task, job, &dir)?;
            if summary.resumed > 0 {
                eprintln!(
                    "resumed {} of {} sweep points from the manifest",
                    summary.resumed, summary.points
                );
            }
            Outputs::default()
        }
    };
    finish(outputs, &config, &dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
