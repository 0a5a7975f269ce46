//! `qmet`: command-line front end for the metrology toolkit.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "qmet", version, about = "Fisher information, CEM bounds and phase-estimation read-out")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// QFI of a basis preparation and the maximal QFI over preparations.
    Qfi(Flags),
    /// CEM bound G, its saturation condition and the ratio gamma.
    Gbound(Flags),
    /// Numerical maximization of the CEM Fisher information.
    Optimize(Flags),
    /// Fisher information of the phase-estimation read-out.
    #[command(name = "phase-sim")]
    PhaseSim(Flags),
    /// Jaynes-Cummings frequency probe; the theta grid is the frequency.
    Jc(Flags),
    /// Oscillator mass estimation over the t grid.
    Oscillator(Flags),
    /// Randomized property suites.
    Selftest(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Grid `start:stop:count` or a single value.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Grid `start:stop:count` or a single value.
    #[arg(long)]
    t: Option<String>,
    /// Register qubits, comma separated.
    #[arg(long)]
    n: Option<String>,
    /// Trotter steps, comma separated.
    #[arg(long)]
    m: Option<String>,
    /// `tune`, `default` or a positive number.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            config: f.config,
            model: f.model,
            theta: f.theta,
            t: f.t,
            n: f.n,
            m: f.m,
            tau: f.tau,
            seed: f.seed,
            out: f.out,
            format: f.format,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match cli.command {
        Command::Qfi(f) => ("qfi", f),
        Command::Gbound(f) => ("gbound", f),
        Command::Optimize(f) => ("optimize", f),
        Command::PhaseSim(f) => ("phase-sim", f),
        Command::Jc(f) => ("jc", f),
        Command::Oscillator(f) => ("oscillator", f),
        Command::Selftest(f) => ("selftest", f),
    };
    let cfg = RunConfig::load(name, &flags.into())?;
    let (table, failure) = match name {
        "qfi" => (commands::cmd_qfi(&cfg)?, None),
        "gbound" => (commands::cmd_gbound(&cfg)?, None),
        "optimize" => (commands::cmd_optimize(&cfg)?, None),
        "phase-sim" => (commands::cmd_phase_sim(&cfg)?, None),
        "jc" => (commands::cmd_jc(&cfg)?, None),
        "oscillator" => (commands::cmd_oscillator(&cfg)?, None),
        _ => commands::cmd_selftest(&cfg)?,
    };
    output::emit(&table, &cfg)?;
    failure.map_or(Ok(()), Err)
}

fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var("QMET_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("QMET_THREADS = '{v}' is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
