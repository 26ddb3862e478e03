//! `lrd`: measure layer stacks, summarize them, and drive selection and
//! pruning analyses with recorded run manifests.

mod commands;
mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lrd_core::MeasurementConfig;

use crate::output::Format;

#[derive(Parser)]
#[command(name = "lrd", version, about = "Layer-wise representation dynamics toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Measurement settings as JSON; unspecified fields keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed override: anchors for `measure`, baselines for `prune-plan`,
    /// the generator for `synth`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl Global {
    pub fn load_config(&self) -> Result<MeasurementConfig> {
        let Some(path) = &self.config else {
            return Ok(MeasurementConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: MeasurementConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Speed, curvature, NRS and GFMI series for each layer stack.
    Measure(commands::measure::MeasureArgs),
    /// Per-sequence summaries and selection scores from measurement sidecars.
    Summarize(commands::tables::SummarizeArgs),
    /// Rank correlations between selection scores and reference scores.
    #[command(subcommand)]
    Select(commands::tables::SelectCommand),
    /// Layer removal plans from measurement sidecars.
    PrunePlan(commands::prune::PrunePlanArgs),
    /// Group means of summaries, or pruning outcome tables.
    #[command(subcommand)]
    Aggregate(commands::tables::AggregateCommand),
    /// Seeded synthetic layer stack with known ground truth.
    Synth(commands::synth::SynthArgs),
    /// Aggregate and select over the bundled reference tables.
    Reproduce(commands::tables::ReproduceArgs),
}

/// What a command managed to do. Any failed item makes the exit code
/// nonzero, but the remaining items are still written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: usize,
}

impl Outcome {
    pub fn fail(&mut self, what: &Path, err: &anyhow::Error) {
        eprintln!("error: {}: {err:#}", what.display());
        self.failures += 1;
    }
}

/// `LRD_THREADS` caps the worker pool. Outputs do not depend on it.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LRD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("LRD_THREADS={raw:?} is not a thread count"))?;
    if n == 0 {
        bail!("LRD_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Measure(a) => commands::measure::run(g, a),
        Command::Summarize(a) => commands::tables::summarize(g, a),
        Command::Select(c) => commands::tables::select(g, c),
        Command::PrunePlan(a) => commands::prune::run(g, a),
        Command::Aggregate(c) => commands::tables::aggregate(g, c),
        Command::Synth(a) => commands::synth::run(g, a),
        Command::Reproduce(a) => commands::tables::reproduce(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(o) if o.failures == 0 => ExitCode::SUCCESS,
        Ok(o) => {
            eprintln!("{} item(s) failed", o.failures);
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
