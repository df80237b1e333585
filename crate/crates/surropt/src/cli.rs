//! Command line: `surropt [options] <command>`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use surropt_core::Variant;

use crate::config::{load_config, Config};
use crate::harness::{self, ExperimentResults, HarnessError};
use crate::report::{emit_reports, summarize_dir, ReportError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "surropt", version, about = "Surrogate-assisted PSO for traffic signal timing, with per-component energy profiling")]
pub struct Cli {
    /// JSON configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides experiment.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides experiment.runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cost of single simulator evaluations (eval_cost.csv).
    ProfileEval,
    /// Surrogate accuracy and cost against training-set size (surrogate_sweep.csv).
    Sweep,
    /// Optimization runs of one variant; one run unless --runs is given.
    Run {
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
    },
    /// Everything: evaluation cost, sweep and all configured variants.
    ExperimentAll,
    /// Rebuilds components.csv and final_fitness.csv from the run series in --out.
    Report,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_short_name(s).ok_or_else(|| format!("unknown variant {s:?}; expected plain, ps, pl, rs or rl"))
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Harness(HarnessError::Config(_)) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

fn configure(cli: &Cli) -> Result<Config, Failure> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    if let Some(runs) = cli.runs {
        config.experiment.runs = runs;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    if let Command::Report = cli.command {
        return Ok(summarize_dir(&cli.out)?);
    }
    let config = configure(cli)?;
    let objective = harness::objective_for(&config)?;
    let results = match &cli.command {
        Command::ProfileEval => {
            ExperimentResults { eval_cost: Some(harness::eval_cost_for(&config, &objective)?), ..Default::default() }
        }
        Command::Sweep => ExperimentResults { sweep: Some(harness::sweep_for(&config, &objective)?), ..Default::default() },
        Command::Run { variant } => {
            let runs = cli.runs.unwrap_or(1);
            ExperimentResults {
                variants: harness::experiment_variants(&config, &objective, &[*variant], config.experiment.seed, runs)?,
                ..Default::default()
            }
        }
        Command::ExperimentAll => harness::experiment_all(&config)?,
        Command::Report => unreachable!(),
    };
    Ok(emit_reports(&results, &cli.out)?)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Emitted files are listed one per line on `stdout`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                let _ = writeln!(stdout, "{}", display(&f));
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
