use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

use citrack_cli::config::ExperimentConfig;
use citrack_cli::experiment::{prepare, run_experiment};
use citrack_cli::oracle::oracle_check;
use citrack_cli::sweep::{sweep, SweepAxis};

#[derive(Parser)]
#[command(
    name = "citrack",
    version,
    about = "Distributed tracking of a moving target: simulate consensus+innovation \
             networks and verify their dynamic-regret bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config, mixing matrix, identifiability, and step size
    /// without running replicas
    Validate {
        /// Experiment configuration (TOML)
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the experiment and write traces, aggregates, and the manifest
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSVs and manifest.json
        #[arg(long)]
        out: PathBuf,
        /// Override run.replicas
        #[arg(long)]
        replicas: Option<usize>,
        /// Override run.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replica execution (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run one experiment per axis value and fit log-log slopes
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sweep axis: T | alpha | noise_scale | path_scale
        #[arg(long)]
        axis: SweepAxis,
        /// Strictly increasing, comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Replay the stacked error recursion against a simulated replica
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum tolerated relative deviation
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    config_hash: &'a str,
    n: usize,
    d: usize,
    horizon: usize,
    identifiable: bool,
    lambda_min_h_bar: f64,
    lambda_max_h_bar: f64,
    lambda_2_p: f64,
    lambda_n_p: f64,
    c_t: f64,
    alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_max: Option<f64>,
    q_norm: f64,
    q_stable: bool,
    mixing_validation: &'a citrack_core::topology::MixingValidation,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let prepared = prepare(&cfg)?;
            print_json(&ValidationSummary {
                config_hash: cfg.hash(),
                n: cfg.n,
                d: cfg.d,
                horizon: cfg.horizon,
                identifiable: prepared.system.is_identifiable(),
                lambda_min_h_bar: prepared.system.lambda_min_h(),
                lambda_max_h_bar: prepared.system.lambda_max_h(),
                lambda_2_p: prepared.mixing.lambda_2(),
                lambda_n_p: prepared.mixing.lambda_n(),
                c_t: prepared.path.value,
                alpha: prepared.alpha,
                alpha_max: prepared.alpha_max.as_ref().map(|r| r.alpha_max),
                q_norm: prepared.error_system.q_norm(),
                q_stable: prepared.error_system.is_stable(),
                mixing_validation: &prepared.mixing_validation,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            out,
            replicas,
            seed,
            threads,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?.with_overrides(replicas, seed)?;
            let outcome = run_experiment(&cfg, Some(&out), threads)?;
            print_json(&outcome.manifest)?;
            if outcome.dominance_violated() {
                eprintln!("warning: Monte Carlo regret exceeds the bound beyond sampling error");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            out,
            axis,
            values,
            replicas,
            seed,
            threads,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?.with_overrides(replicas, seed)?;
            let report = sweep(&cfg, axis, &values, Some(&out), threads)?;
            print_json(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            config,
            seed,
            tolerance,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?.with_overrides(None, seed)?;
            let outcome = oracle_check(&cfg, tolerance)?;
            print_json(&outcome)?;
            if outcome.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
