//! Experiment runner for the branching random walk toolkit.
//!
//! `brw run <config.json>` executes the experiment described in the
//! config and writes `report.json` plus CSV tables into the output
//! directory. `brw kappa` and `brw sample` run the corresponding
//! experiment for the configured model regardless of the config's
//! `experiment` field. Exit codes: 0 all tolerances met, 1 tolerance
//! failure, 2 unreadable or invalid config / runtime failure.

use brw_core::harness::{self, ExperimentConfig, ExperimentKind, HarnessError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "brw", version, about = "Branching random walk simulation and validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config
    Run(RunArgs),
    /// Compute the rightmost-particle constant for the configured model
    Kappa(RunArgs),
    /// Dump simulated point measures for the configured model
    Sample(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON)
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count
    #[arg(long)]
    reps: Option<u64>,
    /// Output directory (default: config out_dir, then ./out)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores; results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = Some(reps);
    }
}

fn run(args: &RunArgs, force: Option<ExperimentKind>) -> Result<bool, HarnessError> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = harness::load_config(&args.config)?;
    if let Some(kind) = force {
        cfg.experiment = kind;
    }
    apply_overrides(&mut cfg, args);
    cfg.validate()?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = harness::run_to_dir(&cfg, &out_dir)?;
    for row in &report.statistics {
        match row.z {
            Some(z) => eprintln!(
                "{}: empirical {:.6} +- {:.6}, oracle {:.6}, z = {:+.2}",
                row.name, row.empirical, row.std_error, row.oracle, z
            ),
            None => eprintln!(
                "{}: {:.6} +- {:.6}",
                row.name, row.empirical, row.std_error
            ),
        }
    }
    for chi in &report.chi_square {
        eprintln!(
            "{}: chi2 = {:.3} (dof {}), p = {:.4}, adjusted {:.4}",
            chi.name, chi.statistic, chi.dof, chi.p_value, chi.p_adjusted
        );
    }
    eprintln!(
        "{}: {} (max |z| = {:.2}; artifacts in {})",
        report.experiment,
        if report.pass { "PASS" } else { "FAIL" },
        report.max_abs_z,
        out_dir.display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, force) = match &cli.command {
        Command::Run(args) => (args, None),
        Command::Kappa(args) => (args, Some(ExperimentKind::ComputeKappa)),
        Command::Sample(args) => (args, Some(ExperimentKind::Sample)),
    };
    match run(args, force) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
