mod plot;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use crnrx::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crnrx::experiments::{self, ExperimentError};

#[derive(Parser)]
#[command(name = "crnrx", version, about = "Chemical receiver experiments for molecular communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config (frames by default).
    Simulate(RunArgs),
    /// Write chain and MAP baselines for the configured scenarios.
    Baseline(RunArgs),
    /// Compare Boltzmann-machine and adaptive detectors.
    BmStudy(RunArgs),
    /// Summarize the CSVs in an output directory and draw SVG plots.
    Report {
        /// Directory holding experiment outputs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::parse(&text).map_err(|e| Failure::Config(e.to_string()))?
            }
            None => ExperimentConfig::default(),
        };
        for (i, kv) in self.overrides.iter().enumerate() {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim(), i + 1)
                .map_err(|e: ConfigError| Failure::Config(format!("--set {kv}: {}", e.message)))?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate().map_err(|e| Failure::Config(e.message))?;
        Ok(cfg)
    }
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io { .. } => Failure::Other(e.into()),
            e if e.is_config() => Failure::Config(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.load()?;
            log::info!("running {} experiment, seed {}", cfg.kind, cfg.seed);
            print_written(&experiments::run_experiment(&cfg)?);
        }
        Command::Baseline(args) => {
            let cfg = args.load()?;
            print_written(&experiments::run_baselines(&cfg)?);
        }
        Command::BmStudy(args) => {
            let mut cfg = args.load()?;
            cfg.kind = ExperimentKind::BmStudy;
            print_written(&experiments::run_experiment(&cfg)?);
        }
        Command::Report { out } => {
            let summary = report::report(&out)?;
            print!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
