//! `clpu`: cold load pick-up assessment from smart-meter data.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use commands::{GridArgs, RatioArgs};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "clpu", version, about = "Cold load pick-up assessment from smart-meter data")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct InputArgs {
    /// Meter files (`meter_id,timestamp,kwh`).
    #[arg(long, num_args = 1..)]
    meters: Vec<PathBuf>,
    /// Temperature file (`timestamp,celsius`).
    #[arg(long)]
    temperature: Option<PathBuf>,
    /// Outage file (`case_id,start,end`).
    #[arg(long)]
    outages: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate inputs and write the feeder series and a partition summary.
    Ingest(InputArgs),
    /// Run the TCL population simulator.
    Simulate {
        /// Scenario JSON.
        scenario: PathBuf,
        /// Outage durations (min) of a case grid.
        #[arg(long, value_delimiter = ',')]
        durations: Vec<u32>,
        /// Restoration temperatures (°C) of a case grid.
        #[arg(long, value_delimiter = ',')]
        temps: Vec<f64>,
        /// Outage day of the case grid.
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Train the diversified-demand model of one partition cell.
    Train {
        #[command(flatten)]
        inputs: InputArgs,
        /// A date inside the cell to train (default: latest outage).
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Estimate CLPU ratios and fit the duration/temperature surface.
    Ratio {
        #[command(flatten)]
        inputs: InputArgs,
        /// Only assess these case ids.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        /// Simulator ground-truth files to compare against.
        #[arg(long = "ground-truth", num_args = 1..)]
        ground_truth: Vec<PathBuf>,
        /// Fit the surface to an existing ratio table instead of assessing outages.
        #[arg(long)]
        from_results: Option<PathBuf>,
    },
    /// Customer-level demand-increase densities and diversity indices.
    Customer {
        #[command(flatten)]
        inputs: InputArgs,
        /// Outage case to analyse.
        #[arg(long)]
        case: Option<String>,
    },
    /// Sensitivity studies.
    Study {
        #[command(subcommand)]
        study: Study,
    },
}

#[derive(Subcommand)]
enum Study {
    /// Hyperparameter and MAPE drift under contaminated training targets.
    Robustness {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Ratio error when only a share of customers is metered.
    Monitored {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        case: Option<String>,
        #[arg(long = "ground-truth", num_args = 1..)]
        ground_truth: Vec<PathBuf>,
        #[arg(long)]
        true_ratio: Option<f64>,
    },
    /// Surface error vs number of training outages.
    OutageCount {
        /// Ratio table (`case_id,O_min,T_c,p_u,p_hat_d,ratio,mape`).
        #[arg(long)]
        results: PathBuf,
    },
}

fn apply_inputs(cfg: &mut RunConfig, inputs: &InputArgs) {
    if !inputs.meters.is_empty() {
        cfg.meters = inputs.meters.clone();
    }
    if inputs.temperature.is_some() {
        cfg.temperature = inputs.temperature.clone();
    }
    if inputs.outages.is_some() {
        cfg.outages = inputs.outages.clone();
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("setting up the worker pool")?;
    }
    match &cli.command {
        Command::Ingest(inputs) => {
            apply_inputs(&mut cfg, inputs);
            commands::ingest(&cfg)
        }
        Command::Simulate {
            scenario,
            durations,
            temps,
            date,
        } => commands::simulate(
            &cfg,
            scenario,
            &GridArgs {
                durations: durations.clone(),
                temps: temps.clone(),
                date: *date,
            },
        ),
        Command::Train { inputs, date } => {
            apply_inputs(&mut cfg, inputs);
            commands::train(&cfg, *date)
        }
        Command::Ratio {
            inputs,
            cases,
            ground_truth,
            from_results,
        } => {
            apply_inputs(&mut cfg, inputs);
            commands::ratio(
                &cfg,
                &RatioArgs {
                    cases: cases.clone(),
                    ground_truth: ground_truth.clone(),
                    from_results: from_results.clone(),
                },
            )
        }
        Command::Customer { inputs, case } => {
            apply_inputs(&mut cfg, inputs);
            commands::customer(&cfg, case.as_deref())
        }
        Command::Study { study } => match study {
            Study::Robustness { inputs, date } => {
                apply_inputs(&mut cfg, inputs);
                commands::study_robustness(&cfg, *date)
            }
            Study::Monitored {
                inputs,
                case,
                ground_truth,
                true_ratio,
            } => {
                apply_inputs(&mut cfg, inputs);
                commands::study_monitored(&cfg, case.as_deref(), ground_truth, *true_ratio)
            }
            Study::OutageCount { results } => commands::study_outage_count(&cfg, results),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
