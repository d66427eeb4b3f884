//! `tdad` — two-stage anomaly detection for heterogeneous factory time
//! series, from the command line.
//!
//! Subcommands: `synth` (generate a labeled dataset), `train`, `score`,
//! `detect`, `eval`, `sweep`, `gradcheck`, `bench`. Every run writes its
//! artifacts under one directory inside `--out` together with the resolved
//! configuration. Set `TDAD_LOG` (standard log filter syntax) to control
//! verbosity; `--threads` bounds internal parallelism.

mod commands;
mod config;
mod error;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tdad",
    version,
    about = "Two-stage anomaly detection on operation-cycle and sensor time series"
)]
struct Cli {
    /// Bound the size of the internal thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Name the run directory instead of using a UTC timestamp; use this
    /// when a reproducible output path is needed.
    #[arg(long, global = true)]
    run_id: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a labeled synthetic assembly-line dataset (3 CSVs + manifest).
    Synth {
        /// Generator settings (JSON); defaults to the built-in day-long line.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parent directory for the run directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train both reconstruction models; write models, loss histories and
    /// scaling sidecars.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train, then export anomaly scores for the held-out region.
    Score {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the two-stage detector at fixed thresholds.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Stage I threshold (> 0) on operation-cycle scores.
        #[arg(long)]
        tau1: Option<f64>,
        /// Stage II threshold (>= 0) on sensor scores; 0 disables Stage II.
        #[arg(long)]
        tau2: Option<f64>,
    },
    /// Evaluate range-wise precision/recall/F1 at fixed thresholds.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
    },
    /// Exhaustive F1 sweep over a threshold grid; writes the full surface.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic gradients against central differences for both
    /// model families.
    Gradcheck {
        /// How many random model/input draws to check per family.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Optionally write a JSON report under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the two-stage pipeline against four single-stage baselines on
    /// generated data and report mean best-F1 per detector.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TDAD_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Ignore the error when a pool already exists (e.g. under a test
        // harness that set one up).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::dispatch(cli.cmd, cli.run_id) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message());
            e.exit_code()
        }
    }
}
