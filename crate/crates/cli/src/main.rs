//! `zonoreach`: reachable-set over-approximation of unknown systems from
//! noisy input-state data.
//!
//! Exit codes: 0 success, 2 config error, 3 rank/excitation failure,
//! 4 containment violation detected during verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zonoreach::config::{ExperimentConfig, HarnessError, LipschitzMode};
use zonoreach::experiment::{run_experiment, verify_containment, ExperimentReport};
use zonoreach::export::{export, ExportFormat};
use zonoreach::{DEMO_LINEAR5D, DEMO_NONLINEAR};

#[derive(Parser)]
#[command(
    name = "zonoreach",
    version,
    about = "Data-driven reachability analysis with guaranteed over-approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config and export the report.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for exported files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of Monte Carlo verification trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Nonlinear runs: force the Lipschitz covering term off.
        #[arg(long)]
        neglect_epsilon: bool,
        /// Comma-separated subset of json,csv,svg (default: all).
        #[arg(long, value_delimiter = ',')]
        formats: Option<Vec<ExportFormat>>,
    },
    /// Re-run the Monte Carlo containment check of a saved report.
    Verify {
        /// Path to a report.json produced by `run`.
        #[arg(long)]
        report: PathBuf,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Use a fresh verification seed instead of the report's.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render SVG projections from a saved report.
    Plot {
        /// Path to a report.json produced by `run`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Projection dimension pair, e.g. `0,1` (default: canonical pairs).
        #[arg(long)]
        dims: Option<String>,
    },
    /// Built-in 5-state linear reproduction experiment.
    DemoLinear5d {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Built-in 2-state nonlinear reactor reproduction experiment.
    DemoNonlinear {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Keep the covering term off (the default for this demo).
        #[arg(long)]
        neglect_epsilon: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ZONOREACH_LOG")).init();
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch() -> Result<ExitCode, HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            neglect_epsilon,
            formats,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::from_json(&text)?;
            run_and_export(cfg, &out, seed, trials, neglect_epsilon, formats)
        }
        Command::Verify {
            report,
            trials,
            seed,
        } => {
            let text = std::fs::read_to_string(&report)?;
            let rep = ExperimentReport::from_json(&text)?;
            let trials = trials.unwrap_or(rep.config.verification.trials);
            let master = seed.unwrap_or(rep.config.seed);
            let tally =
                verify_containment(&rep.reach_data_driven, &rep.config, trials, master)?;
            println!(
                "verify `{}`: {}/{} trials contained",
                rep.config.name, tally.passes, tally.trials
            );
            if !tally.failures.is_empty() {
                for f in &tally.failures {
                    eprintln!(
                        "  violation: trial {} escaped at step {} (state {:?})",
                        f.trial, f.step, f.state
                    );
                }
                return Err(HarnessError::ContainmentViolation {
                    failures: tally.trials - tally.passes,
                    trials: tally.trials,
                });
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { report, out, dims } => {
            let text = std::fs::read_to_string(&report)?;
            let rep = ExperimentReport::from_json(&text)?;
            let dims = dims.map(|s| parse_dims(&s)).transpose()?;
            let files = export(&rep, &[ExportFormat::Svg], &out, dims)?;
            for f in &files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::DemoLinear5d { out, seed, trials } => {
            let cfg = ExperimentConfig::from_json(DEMO_LINEAR5D).expect("built-in config");
            run_and_export(cfg, &out, seed, trials, false, None)
        }
        Command::DemoNonlinear {
            out,
            seed,
            trials,
            neglect_epsilon,
        } => {
            let cfg = ExperimentConfig::from_json(DEMO_NONLINEAR).expect("built-in config");
            run_and_export(cfg, &out, seed, trials, neglect_epsilon, None)
        }
    }
}

fn run_and_export(
    mut cfg: ExperimentConfig,
    out: &PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    neglect_epsilon: bool,
    formats: Option<Vec<ExportFormat>>,
) -> Result<ExitCode, HarnessError> {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(trials) = trials {
        cfg.verification.trials = trials;
    }
    if neglect_epsilon {
        cfg.lipschitz.mode = LipschitzMode::Neglect;
        cfg.lipschitz.l_star = None;
        cfg.lipschitz.delta = None;
    }
    let report = run_experiment(&cfg)?;
    let formats =
        formats.unwrap_or_else(|| vec![ExportFormat::Json, ExportFormat::Csv, ExportFormat::Svg]);
    let files = export(&report, &formats, out, None)?;

    println!(
        "experiment `{}`: horizon {}, {} data points, containment {}/{}",
        report.config.name,
        report.config.horizon,
        report
            .rank
            .cols,
        report.containment.passes,
        report.containment.trials
    );
    if let Some(inclusion) = &report.inclusion {
        let worst = inclusion
            .steps
            .iter()
            .map(|s| s.worst_margin)
            .fold(f64::INFINITY, f64::min);
        println!(
            "inclusion: oracle inside data-driven sets, worst margin {worst:.3e} over {} directions",
            inclusion.directions
        );
    }
    for f in &files {
        println!("{}", f.display());
    }

    if report.containment.passes < report.containment.trials {
        return Err(HarnessError::ContainmentViolation {
            failures: report.containment.trials - report.containment.passes,
            trials: report.containment.trials,
        });
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_dims(s: &str) -> Result<(usize, usize), HarnessError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(HarnessError::config("dims", "expected two indices like `0,1`"));
    }
    let a = parts[0]
        .parse::<usize>()
        .map_err(|e| HarnessError::config("dims", e.to_string()))?;
    let b = parts[1]
        .parse::<usize>()
        .map_err(|e| HarnessError::config("dims", e.to_string()))?;
    Ok((a, b))
}
