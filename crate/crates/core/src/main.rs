//! Command-line front end: runs fits, sweeps, bounds, BER, and baseline
//! experiments from a TOML config, writing CSV (or JSON lines) results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure. Errors go
//! to stderr; results only to `--out` or stdout.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sim_hmimo::harness::output::{write_csv, write_jsonl, write_trace_csv};
use sim_hmimo::harness::{
    run_baseline, run_bounds, run_fit, run_sweep, ExperimentConfig, RunOptions, SweepOutput,
};
use sim_hmimo::SimError;

const THREADS_ENV: &str = "SIM_HMIMO_THREADS";

#[derive(Parser)]
#[command(
    name = "sim-hmimo",
    about = "Stacked-metasurface holographic MIMO link simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one channel realization; emits the winning loss trace as CSV.
    Fit(CommonArgs),
    /// Sweep one variable, fitting the SIM at every point.
    Sweep(CommonArgs),
    /// Ideal-policy capacity with analytical bounds; no phase fitting.
    Bounds(CommonArgs),
    /// Sweep with BPSK bit-error simulation on the fitted phases.
    Ber(CommonArgs),
    /// Conventional massive-MIMO reference capacity.
    Baseline(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON lines instead of CSV.
    #[arg(long)]
    json: bool,
    /// Worker threads (falls back to SIM_HMIMO_THREADS, then 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config's Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                SimError::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    let args = match &cli.command {
        Command::Fit(a)
        | Command::Sweep(a)
        | Command::Bounds(a)
        | Command::Ber(a)
        | Command::Baseline(a) => a,
    };
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials < 1 {
            return Err(SimError::config("--trials must be at least 1"));
        }
        config.trials = trials;
    }
    let opts = RunOptions { fit: true, ber: false, threads: resolve_threads(args.threads)? };

    match cli.command {
        Command::Fit(ref args) => {
            let output = run_fit(&config)?;
            emit(args, |w| write_trace_csv(w, &output.result))?;
            eprintln!(
                "fit: seed {} start {} iterations {} nmse {:.3e} capacity {:.3} (ideal {:.3}) alpha {:.6e}{:+.6e}j",
                output.seed,
                output.result.start_index,
                output.result.iterations,
                output.result.final_nmse,
                output.sim_capacity,
                output.ideal_capacity,
                output.result.phases.alpha.re,
                output.result.phases.alpha.im,
            );
            Ok(())
        }
        Command::Sweep(ref args) => {
            let out = run_sweep(&config, &opts)?;
            emit_sweep(args, &out)
        }
        Command::Bounds(ref args) => {
            let out = run_bounds(&config, &opts)?;
            emit_sweep(args, &out)
        }
        Command::Ber(ref args) => {
            let out = run_sweep(&config, &RunOptions { ber: true, ..opts })?;
            emit_sweep(args, &out)
        }
        Command::Baseline(ref args) => {
            let out = run_baseline(&config, &opts)?;
            emit_sweep(args, &out)
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, SimError> {
    let threads = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(text) => text.parse::<usize>().map_err(|_| {
                SimError::config(format!("{THREADS_ENV}='{text}' is not a thread count"))
            })?,
            Err(_) => 1,
        },
    };
    if threads == 0 {
        return Err(SimError::config("thread count must be at least 1"));
    }
    Ok(threads)
}

fn emit_sweep(args: &CommonArgs, out: &SweepOutput) -> Result<(), SimError> {
    if args.json {
        emit(args, |w| write_jsonl(w, out))
    } else {
        emit(args, |w| write_csv(w, out))
    }
}

fn emit<F>(args: &CommonArgs, write: F) -> Result<(), SimError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            write(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
