//! `icilab`: runs Monte-Carlo sweeps, estimator traces and self-checks.

mod check;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icilab::harness::{
    run_experiment, summarize, trace_cell, write_trace_csv, ExperimentSpec, Summary, SweepAxis,
};
use icilab::receivers::ReceiverKind;
use icilab::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "icilab",
    version,
    about = "Differential OFDM ICI-mitigation lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write mse.csv, summary.csv and reduction.csv.
    Run(RunArgs),
    /// Dump the A-FFT estimator convergence (iter, f_e, E_dB) for one cell.
    Trace(TraceArgs),
    /// Run the built-in oracle and invariant checks.
    Check,
    /// Print the default experiment configuration.
    Config,
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment file (TOML); defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweep axis. Switching axis resets the values to that axis' defaults
    /// unless --values is given.
    #[arg(long)]
    sweep: Option<SweepAxis>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Use seeds 1..=N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated receivers (ConvFFT, PFFT, FFFT, AFFT).
    #[arg(long, value_delimiter = ',')]
    receivers: Option<Vec<ReceiverKind>>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Sweep value of the cell; defaults to the first value.
    #[arg(long)]
    value: Option<f64>,
    /// Seed of the cell; defaults to the first seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV file to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn resolve(args: &SpecArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(axis) = args.sweep {
        if axis != spec.sweep {
            spec.sweep = axis;
            spec.values = axis.default_values(&spec.link);
        }
    }
    if let Some(v) = &args.values {
        spec.values = v.clone();
    }
    if let Some(n) = args.seeds {
        spec.seeds = (1..=n).collect();
    }
    if let Some(r) = &args.receivers {
        spec.receivers = r.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> icilab::Result<()>,
) -> Result<(), Failure> {
    let mut w = BufWriter::new(
        File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
    );
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn print_summary(summary: &Summary) {
    println!(
        "{:>12} {:>8} {:>10} {:>10} {:>6}",
        summary.sweep.name(),
        "receiver",
        "median_dB",
        "mean_dB",
        "n"
    );
    for r in &summary.rows {
        println!(
            "{:>12} {:>8} {:>10.2} {:>10.2} {:>6}",
            r.value, r.receiver, r.median_db, r.mean_db, r.count
        );
    }
    for (v, red) in &summary.reduction {
        println!(
            "{}={v}: AFFT vs FFFT reduction {:.1}%",
            summary.sweep.name(),
            100.0 * red
        );
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut spec = resolve(&args.spec)?;
    if let Some(out) = &args.out {
        spec.output = out.clone();
    }
    fs::create_dir_all(&spec.output)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", spec.output.display())))?;
    log::info!(
        "{} sweep: {} values x {} seeds x {} receivers",
        spec.sweep,
        spec.values.len(),
        spec.seeds.len(),
        spec.receivers.len()
    );
    let report = run_experiment(&spec)?;
    let summary = summarize(&report);
    let dir = spec.output.clone();
    write_file(&dir.join("mse.csv"), |w| report.write_csv(w))?;
    write_file(&dir.join("summary.csv"), |w| summary.write_csv(w))?;
    write_file(&dir.join("reduction.csv"), |w| {
        summary.write_reduction_csv(w)
    })?;
    fs::write(dir.join("spec.toml"), spec.to_toml()?)?;
    print_summary(&summary);
    let failures = report.failures();
    if failures > 0 {
        for r in report.rows.iter().filter(|r| r.failed()) {
            eprintln!(
                "failed: {}={} {} seed {}: {}",
                r.sweep,
                r.value,
                r.receiver,
                r.seed,
                r.error.as_deref().unwrap_or("unknown error")
            );
        }
        return Err(Failure::Runtime(format!(
            "{failures} of {} rows failed",
            report.rows.len()
        )));
    }
    Ok(())
}

fn trace(args: &TraceArgs) -> Result<(), Failure> {
    let spec = resolve(&args.spec)?;
    let value = args.value.unwrap_or(spec.values[0]);
    let seed = args.seed.unwrap_or(spec.seeds[0]);
    let state = trace_cell(&spec, value, seed)?;
    match &args.out {
        Some(path) => write_file(path, |w| write_trace_csv(&state, w))?,
        None => write_trace_csv(&state, io::stdout().lock())?,
    }
    log::info!("f_e = {} Hz after {} iterations", state.fe, state.iter);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Trace(args) => trace(args),
        Command::Check => {
            if check::run_all() {
                Ok(())
            } else {
                Err(Failure::Runtime("self-check failed".into()))
            }
        }
        Command::Config => ExperimentSpec::default()
            .to_toml()
            .map(|t| print!("{t}"))
            .map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("icilab: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("icilab: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
