use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use wtdp_cli::experiment::{analyze, simulate, write_analysis_csv, write_simulation_csv};
use wtdp_cli::{Error, ExperimentSpec};

#[derive(Parser)]
#[command(
    name = "wtdp",
    version,
    about = "Wireless topology discovery: closed-form analysis and Monte-Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form neighbor-discovery metrics over the grid.
    Analyze(Common),
    /// Simulate the full protocol over the grid.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines file for per-trial records and node events (simulate only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Overrides the seed in the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the trial count in the experiment file.
    #[arg(long)]
    trials: Option<u64>,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn load(c: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::load(&c.config)?;
    if let Some(seed) = c.seed {
        spec.params.seed = seed;
    }
    if let Some(trials) = c.trials {
        spec.trials = trials;
        spec.validate()?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze(c) => {
            let spec = load(&c)?;
            let points = analyze(&spec)?;
            write_analysis_csv(&spec, &points, create(&c.out)?)
        }
        Command::Simulate(c) => {
            let spec = load(&c)?;
            let points = match &c.trace {
                Some(path) => {
                    let mut w = create(path)?;
                    let points = simulate(&spec, Some(&mut w))?;
                    w.flush().map_err(|e| Error::io(path, e))?;
                    points
                }
                None => simulate(&spec, None)?,
            };
            write_simulation_csv(&spec, &points, create(&c.out)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Analyze(c) | Command::Simulate(c) => c.threads,
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")
        {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
