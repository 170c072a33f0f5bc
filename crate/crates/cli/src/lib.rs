//! `spicl` command line: single runs, λ sweeps and gain checks driven by scenario files.

pub mod config;
pub mod error;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spicl::experiment::output::{run_summary, write_run_files, RUN_SUMMARY_FILE};
use spicl::experiment::{lambda_dir_name, lambda_sweep_with, run_scenario, SimConfig, SweepReport};
use spicl::SimConfig64;

pub use config::ScenarioFile;
pub use error::CliError;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFUSION_FILE: &str = "confusion.txt";
pub const CONFIG_ECHO_FILE: &str = "scenario.cfg";

#[derive(Debug, Parser)]
#[command(
    name = "spicl",
    version,
    about = "Sparsity-promoting concurrent learning simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its series, gain report and summary.
    Run(RunArgs),
    /// Simulate one scenario per sparsity value.
    Sweep(SweepArgs),
    /// Print the gain conditions and ultimate bound without simulating.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file; omitted keys keep the reference values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a key, e.g. `--set estimator.lambda=0.01`.
    #[arg(long = "set", value_name = "K=V")]
    pub overrides: Vec<String>,
    /// Keep every N-th step in the series files.
    #[arg(long, value_name = "N")]
    pub decimate: Option<usize>,
    /// Magnitude above which an estimate counts as nonzero.
    #[arg(long, value_name = "TAU")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Comma-separated sparsity values; defaults to 0,1e-5,1e-4,1e-3,5e-3,1e-2,5e-2,1e-1.
    #[arg(long, value_name = "CSV")]
    pub lambdas: Option<String>,
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Report these sparsity values instead of the configured one.
    #[arg(long, value_name = "CSV")]
    pub lambdas: Option<String>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioFile, CliError> {
        let mut file = match &self.config {
            Some(path) => ScenarioFile::load(path)?,
            None => ScenarioFile::default(),
        };
        for o in &self.overrides {
            file.apply_override(o)?;
        }
        if let Some(d) = self.decimate {
            file.decimate = d;
        }
        if let Some(t) = self.threshold {
            file.threshold = t;
        }
        Ok(file)
    }
}

pub fn parse_lambdas(csv: &str) -> Result<Vec<f64>, CliError> {
    let values = csv
        .split(',')
        .map(|v| {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--lambdas: not a number: {:?}", v.trim())))?;
            if x.is_finite() && x >= 0.0 {
                Ok(x)
            } else {
                Err(CliError::Config(format!(
                    "--lambdas: values must be finite and >= 0, got {x}"
                )))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config("--lambdas is empty".into()));
    }
    Ok(values)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let file = args.scenario.resolve()?;
    let cfg = file.to_sim_config()?;
    create_dir(&args.out)?;
    write_file(&args.out.join(CONFIG_ECHO_FILE), &file.serialize())?;
    let run = run_scenario(&cfg)?;
    write_run_files(&args.out, &run, cfg.stack.ybar).map_err(|e| CliError::io(&args.out, e))?;
    print!("{}", run_summary(&run, cfg.stack.ybar));
    Ok(())
}

/// Runs the sweep and writes everything under `out`; returns the report even when some λ failed.
pub fn sweep_to_dir(cfg: &SimConfig64, lambdas: &[f64], workers: usize, out: &Path) -> Result<SweepReport, CliError> {
    create_dir(out)?;
    let io_failure = std::sync::Mutex::new(None);
    let report = lambda_sweep_with(cfg, lambdas, workers, |lambda, outcome| {
        let dir = out.join(lambda_dir_name(lambda));
        let written = match outcome {
            Ok(run) => write_run_files(&dir, run, cfg.stack.ybar),
            Err(e) => fs::create_dir_all(&dir).and_then(|_| {
                fs::write(
                    dir.join(RUN_SUMMARY_FILE),
                    format!("lambda = {lambda:e}\nfailed = true\nerror = {e}\n"),
                )
            }),
        };
        if let Err(e) = written {
            io_failure
                .lock()
                .expect("poisoned")
                .get_or_insert(CliError::io(&dir, e));
        }
    })?;
    if let Some(e) = io_failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    write_file(&out.join(SUMMARY_FILE), &report.summary_table())?;
    write_file(&out.join(CONFUSION_FILE), &report.confusion_blocks())?;
    Ok(report)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file = args.scenario.resolve()?;
    let cfg = file.to_sim_config()?;
    let lambdas = match &args.lambdas {
        Some(csv) => parse_lambdas(csv)?,
        None => SimConfig::reference_lambdas(),
    };
    if args.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    create_dir(&args.out)?;
    write_file(&args.out.join(CONFIG_ECHO_FILE), &file.serialize())?;
    let report = sweep_to_dir(&cfg, &lambdas, args.workers, &args.out)?;
    print!("{}", report.summary_table());
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| format!("lambda = {:e}: {f}", r.lambda)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Divergence(failed.join("\n")))
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let cfg = args.scenario.resolve()?.to_sim_config()?;
    let lambdas = match &args.lambdas {
        Some(csv) => parse_lambdas(csv)?,
        None => vec![cfg.sparsity],
    };
    for (i, lambda) in lambdas.into_iter().enumerate() {
        if i > 0 {
            println!();
        }
        let report = cfg.with_sparsity(lambda).gain_report()?;
        println!("[lambda = {lambda:e}]");
        print!("{report}");
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
    }
}
