//! Command-line front end: `outage`, `moments` and `validate`.

pub mod config;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{load_scenario, parse_scenario, render_manifest, RunMode, Scenario};
pub use run::{run_moment_report, run_scenario, Overrides, RunSummary};

/// Exit status for a configuration or usage problem.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit status when any output row records a numerical failure.
pub const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "retrotrack", version, about = "Outage analysis for CCR-based optical fine tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic and/or Monte Carlo outage over the configured sweep.
    Outage(RunArgs),
    /// Exact versus Taylor-approximated moments of S over σ_s/w ratios.
    Moments(RunArgs),
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<RunMode>,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    RunMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (analytic-exact, analytic-approx, montecarlo, all)"))
}

fn prepare(args: &RunArgs) -> crate::Result<Scenario> {
    let mut scenario = load_scenario(&args.config)?;
    Overrides { samples: args.samples, seed: args.seed, workers: args.workers, mode: args.mode }
        .apply(&mut scenario)?;
    Ok(scenario)
}

fn finish(result: crate::Result<RunSummary>) -> ExitCode {
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            if summary.failed_rows > 0 {
                eprintln!("{} row(s) failed numerically; see the status column", summary.failed_rows);
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                crate::Error::Config(_) | crate::Error::Domain(_) => ExitCode::from(EXIT_VALIDATION),
                _ => ExitCode::from(EXIT_NUMERICAL),
            }
        }
    }
}

/// Runs a parsed command line and maps the outcome to an exit status.
pub fn execute(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Outage(args) => finish(prepare(&args).and_then(|s| run_scenario(&s, &args.out))),
        Command::Moments(args) => finish(prepare(&args).and_then(|s| run_moment_report(&s, &args.out))),
        Command::Validate { config } => match load_scenario(&config) {
            Ok(s) => {
                let points = s.sweep.values.len() * s.series_points().len();
                println!(
                    "{}: ok ({} layout(s), {} point(s) per layout, mode {})",
                    config.display(),
                    s.layouts.len(),
                    points,
                    s.config.run.mode.as_str()
                );
                ExitCode::SUCCESS
            }
            Err(e) => finish(Err(e)),
        },
    }
}
