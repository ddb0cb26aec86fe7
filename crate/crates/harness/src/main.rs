use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use smoothloc::{CsvTable, Error, Experiment, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "smoothloc", version, about = "Location estimation by smoothed maximum likelihood")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a 1-d location from simulated samples.
    Estimate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed smoothing radius instead of the sample-size schedule.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a multivariate location from simulated samples.
    EstimateHd {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smoothed Fisher information over a grid of radii.
    Fisher {
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        r_grid: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a config file.
    Bench {
        kind: BenchKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Coverage,
    CoverageHd,
    SawtoothPhase,
    Concentration,
}

impl From<BenchKind> for Experiment {
    fn from(k: BenchKind) -> Self {
        match k {
            BenchKind::Coverage => Experiment::Coverage,
            BenchKind::CoverageHd => Experiment::CoverageHd,
            BenchKind::SawtoothPhase => Experiment::SawtoothPhase,
            BenchKind::Concentration => Experiment::Concentration,
        }
    }
}

fn emit(table: &CsvTable, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => table.write_file(&path),
        None => {
            print!("{}", table.to_csv_string());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, out, threads) = match cli.command {
        Command::Estimate {
            model,
            n,
            delta,
            seed,
            r,
            lambda,
            out,
        } => (
            ExperimentConfig {
                experiment: Some(Experiment::Estimate),
                model: Some(model),
                n: Some(n),
                delta: Some(delta),
                seed: Some(seed),
                r,
                lambda: Some(lambda),
                ..Default::default()
            },
            out,
            1,
        ),
        Command::EstimateHd {
            model,
            n,
            delta,
            r,
            eta,
            seed,
            lambda,
            out,
        } => (
            ExperimentConfig {
                experiment: Some(Experiment::EstimateHd),
                model: Some(model),
                n: Some(n),
                delta: Some(delta),
                r: Some(r),
                eta: Some(eta),
                seed: Some(seed),
                lambda: Some(lambda),
                ..Default::default()
            },
            out,
            1,
        ),
        Command::Fisher { model, r_grid, out } => (
            ExperimentConfig {
                experiment: Some(Experiment::FisherSweep),
                model: Some(model),
                r_grid: Some(r_grid),
                ..Default::default()
            },
            out,
            1,
        ),
        Command::Bench {
            kind,
            config,
            out,
            threads,
        } => {
            let mut cfg = ExperimentConfig::parse(&std::fs::read_to_string(&config)?)?;
            let kind = Experiment::from(kind);
            match cfg.experiment {
                Some(e) if e != kind => {
                    return Err(Error::config(format!("config describes '{e}', not '{kind}'")));
                }
                _ => cfg.experiment = Some(kind),
            }
            let out = out.or_else(|| cfg.output.clone().map(PathBuf::from));
            let threads = threads.or(cfg.threads).unwrap_or(1);
            (cfg, out, threads)
        }
    };
    cfg.validate()?;
    if threads == 0 {
        return Err(Error::config("threads must be at least 1"));
    }
    let table = smoothloc::experiments::run_experiment(&cfg, threads)?;
    emit(&table, out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
