use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebesr_cli::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "ebesr", version, about = "Electron-beam-driven ESR simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Second-harmonic near field over an offset, standoff or map sweep.
    FieldMap(Common),
    /// Beam-on/off lock-in spectra, their differential and its fit.
    Spectrum(Common),
    /// On-resonance signals and the recovered beam signal per position.
    Sweep(Common),
    /// Fit the derivative lineshape to a spectrum CSV.
    Fit(WithInput),
    /// Fit the coil calibration function to an I/Q CSV.
    Calibrate(WithInput),
}

#[derive(Args)]
struct Common {
    /// Scenario file (.toml, or .json).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; sidecar files are written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Seed for injected noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct WithInput {
    /// Data CSV to fit.
    #[arg(long)]
    input: PathBuf,
    /// Optional scenario, recorded in the run report.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file. The report is always printed to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, opts) = match cli.command {
        Cmd::FieldMap(c) => (Command::FieldMap, common(c)),
        Cmd::Spectrum(c) => (Command::Spectrum, common(c)),
        Cmd::Sweep(c) => (Command::Sweep, common(c)),
        Cmd::Fit(w) => (Command::Fit, with_input(w)),
        Cmd::Calibrate(w) => (Command::Calibrate, with_input(w)),
    };
    match run(cmd, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn common(c: Common) -> RunOptions {
    RunOptions {
        config: Some(c.config),
        input: None,
        out: c.out,
        jobs: c.jobs as usize,
        seed: c.seed,
    }
}

fn with_input(w: WithInput) -> RunOptions {
    RunOptions {
        config: w.config,
        input: Some(w.input),
        out: w.out,
        jobs: w.jobs as usize,
        seed: w.seed,
    }
}
