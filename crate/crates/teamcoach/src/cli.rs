//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use teamcoach_core::domains::DomainKind;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::pipeline::{paths, Outcome, Pipeline, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "teamcoach",
    version,
    about = "Learn team behavior models and benchmark intervention strategies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Domain (movers, cleanup, rescue, rescue2, tiny); overrides the config.
    #[arg(long, global = true)]
    domain: Option<DomainKind>,
    /// TOML experiment configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; defaults to the config's `out` or `runs/<domain>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads used within a stage.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate training and evaluation demonstrations.
    Generate,
    /// Fit behavior models to every training set.
    Train,
    /// Score mental-state inference on the evaluation set.
    Infer,
    /// Evaluate the team value of every state and mental-state profile.
    Value,
    /// Run every intervention strategy over the benchmark episodes.
    Benchmark,
    /// Aggregate benchmark and inference results.
    Report,
    /// Run all stages, skipping those whose inputs are unchanged.
    Pipeline,
}

fn pipeline(common: &Common) -> Result<Pipeline> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    if let Some(d) = common.domain {
        cfg.domain = d;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.domain.name()));
    Pipeline::new(cfg, dir, common.jobs)
}

fn print_outcome(stage: Stage, outcome: Outcome) {
    match outcome {
        Outcome::Ran { seconds } => println!("{stage}: done in {seconds:.2} s"),
        Outcome::Skipped => println!("{stage}: up to date, skipped"),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let p = pipeline(&cli.common)?;
    let stages: Vec<Stage> = match cli.command {
        Command::Generate => vec![Stage::Generate],
        Command::Train => vec![Stage::Train],
        Command::Infer => vec![Stage::Infer],
        Command::Value => vec![Stage::Value],
        Command::Benchmark => vec![Stage::Benchmark],
        Command::Report => vec![Stage::Report],
        Command::Pipeline => Stage::ALL.to_vec(),
    };
    for &stage in &stages {
        print_outcome(stage, p.run(stage)?);
    }
    if stages.contains(&Stage::Report) {
        let path = p.dir().join(paths::REPORT_TEXT);
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })?;
        print!("\n{text}");
    }
    Ok(())
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on invalid input or artifacts, 2 on numerical failure.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
