//! Command-line harness: `toffoli-distill <command> [--config FILE]
//! [--seed N] [--trials N] [--out PATH] [--format json|csv] [--check]`.
//!
//! Exit codes: 0 on success, 1 on a config or run error, 2 when `--check`
//! is given and a report check fails.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use config::load;
pub use report::{Check, Metric, RunReport, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "toffoli-distill",
    version,
    about = "Distilled-ancilla Toffoli simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config for the subcommand; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Exit with code 2 if any report check fails.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Branch-complete Toffoli gadget verification.
    ToffoliVerify,
    /// Postselected and sampled distillation trees.
    Distill,
    /// Noisy transversal C-NOT measurement and raw state preparation.
    NoisyMeas,
    /// Block-to-block error ensembles.
    Ensemble,
    /// Progressive concatenation schedules.
    Estimate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ToffoliVerify => "toffoli-verify",
            Command::Distill => "distill",
            Command::NoisyMeas => "noisy-meas",
            Command::Ensemble => "ensemble",
            Command::Estimate => "estimate",
        }
    }
}

/// Builds the report for `cli` without writing it anywhere.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let path = cli.config.as_deref();
    let start = Instant::now();
    let mut rep = match cli.command {
        Command::ToffoliVerify => {
            let mut c: config::ToffoliConfig = load(path)?;
            override_seed(&mut c.seed, cli.seed);
            if let Some(t) = cli.trials {
                c.random_inputs = t as usize;
            }
            commands::toffoli_verify(&c)?
        }
        Command::Distill => {
            let mut c: config::DistillConfig = load(path)?;
            override_seed(&mut c.seed, cli.seed);
            c.trials = cli.trials.unwrap_or(c.trials);
            commands::distill(&c)?
        }
        Command::NoisyMeas => {
            let mut c: config::NoisyMeasConfig = load(path)?;
            override_seed(&mut c.seed, cli.seed);
            c.trials = cli.trials.unwrap_or(c.trials);
            commands::noisy_meas(&c)?
        }
        Command::Ensemble => {
            let mut c: config::EnsembleConfig = load(path)?;
            override_seed(&mut c.seed, cli.seed);
            if let Some(t) = cli.trials {
                c.realizations = t as usize;
                c.samples = t as usize;
            }
            commands::ensemble(&c)?
        }
        Command::Estimate => {
            let mut c: config::EstimateConfig = load(path)?;
            override_seed(&mut c.seed, cli.seed);
            commands::estimate(&c)?
        }
    };
    rep.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

fn override_seed(seed: &mut u64, flag: Option<u64>) {
    if let Some(s) = flag {
        *seed = s;
    }
}

fn write_report(cli: &Cli, rep: &RunReport) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("writing output: {e}"));
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(io)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match cli.format {
        Format::Json => writeln!(out, "{}", rep.to_json()?).map_err(io)?,
        Format::Csv => rep.write_csv(&mut out)?,
    }
    out.flush().map_err(io)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let rep = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = write_report(&cli, &rep) {
        eprintln!("error: {e}");
        return 1;
    }
    for c in rep.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    if cli.check && !rep.all_passed() {
        return 2;
    }
    0
}
