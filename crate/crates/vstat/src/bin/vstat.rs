//! Command-line surface: simulation studies, CSV benchmarking, and ad-hoc
//! model fitting / prediction / variance estimation.

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vstat::ensemble::{evaluate_point, EnsembleFit};
use vstat::error::{Error, Result};
use vstat::experiments::{
    bench_predictive, run_bias_experiment, run_components_experiment, run_coverage_experiment,
    run_fit, variance_at_points, write_csv, write_json, ExperimentConfig, FlatCsv,
};
use vstat::variance::Method;

#[derive(Parser)]
#[command(name = "vstat", version, about = "Subsampled ensembles with variance estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; schema documented in the repository README.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (JSON; simulate/bench also write a sibling .csv).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study.
    Simulate {
        #[command(subcommand)]
        study: Study,
    },
    /// Predictive benchmark on a dataset (80/20 split, both sampling modes).
    Bench,
    /// Fit an ensemble and save it.
    Fit,
    /// Predict at points with a saved model.
    Predict,
    /// Variance estimates and intervals at points with a saved model.
    Variance,
}

#[derive(Subcommand)]
enum Study {
    /// Estimator bias against Monte Carlo truth.
    Bias,
    /// Normality, variance ratios, and interval coverage.
    Coverage,
    /// Variance components across ensemble sizes.
    Components,
}

#[derive(Serialize, Deserialize)]
struct PredictConfig {
    model: String,
    points: Vec<Vec<f64>>,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Serialize, Deserialize)]
struct VarianceConfig {
    model: String,
    points: Vec<Vec<f64>>,
    estimators: Vec<Method>,
    #[serde(default = "default_level")]
    level: f64,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Option<PathBuf>) -> Result<T> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::config("--config is required for this command"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("invalid config {}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => write_json(report, path),
        None => {
            let json = serde_json::to_string_pretty(report)
                .map_err(|e| Error::data(format!("cannot serialize report: {e}")))?;
            println!("{json}");
            Ok(())
        }
    }
}

fn emit_with_csv<T: Serialize + FlatCsv>(report: &T, out: &Option<PathBuf>) -> Result<()> {
    emit(report, out)?;
    if let Some(path) = out {
        write_csv(report, path.with_extension("csv"))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { study } => {
            let mut config: ExperimentConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            match study {
                Study::Bias => emit_with_csv(&run_bias_experiment(&config)?, &cli.out),
                Study::Coverage => emit_with_csv(&run_coverage_experiment(&config)?, &cli.out),
                Study::Components => emit_with_csv(&run_components_experiment(&config)?, &cli.out),
            }
        }
        Command::Bench => {
            let mut config: ExperimentConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            emit_with_csv(&bench_predictive(&config)?, &cli.out)
        }
        Command::Fit => {
            let mut config: ExperimentConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let fit = run_fit(&config)?;
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::config("fit requires --out for the model file"))?;
            fit.save(out)
        }
        Command::Predict => {
            let config: PredictConfig = read_config(&cli.config)?;
            let fit = EnsembleFit::load(Path::new(&config.model))?;
            let predictions: Vec<f64> = config
                .points
                .iter()
                .map(|p| Ok(evaluate_point(&fit, p)?.mean))
                .collect::<Result<_>>()?;
            emit(&predictions, &cli.out)
        }
        Command::Variance => {
            let config: VarianceConfig = read_config(&cli.config)?;
            let fit = EnsembleFit::load(Path::new(&config.model))?;
            let report = variance_at_points(&fit, &config.points, &config.estimators, config.level)?;
            emit(&report, &cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build();
            match pool {
                Ok(pool) => pool.install(|| run(&cli)),
                Err(e) => Err(Error::config(format!("cannot build thread pool: {e}"))),
            }
        }
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Data(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
