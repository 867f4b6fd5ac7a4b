mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{bms, dissect, eval, gen_stim, predict, relate, report, train};

/// Dissection toolkit for deep visual-saliency models.
#[derive(Debug, Parser)]
#[command(name = "saldissect", version)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON file with parameters for the chosen command; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the standard synthetic pop-out suite.
    GenStim(gen_stim::Args),
    /// Per-category statistics of activation maps.
    Dissect(dissect::Args),
    /// Train a 1x1 linear readout on one layer.
    TrainDecoder(train::Args),
    /// Saliency maps from a trained readout.
    Predict(predict::Args),
    /// Score saliency models on the synthetic suite.
    EvalSynthetic(eval::Args),
    /// Boolean Map Saliency for images.
    Bms(bms::Args),
    /// Relate inner-representation saliency to output saliency.
    Relate(relate::Args),
    /// Render result CSVs as Markdown tables.
    Report(report::Args),
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::GenStim(a) => gen_stim::run(config::merge(a, cfg)?),
        Command::Dissect(a) => dissect::run(config::merge(a, cfg)?),
        Command::TrainDecoder(a) => train::run(config::merge(a, cfg)?),
        Command::Predict(a) => predict::run(config::merge(a, cfg)?),
        Command::EvalSynthetic(a) => eval::run(config::merge(a, cfg)?),
        Command::Bms(a) => bms::run(config::merge(a, cfg)?),
        Command::Relate(a) => relate::run(config::merge(a, cfg)?),
        Command::Report(a) => report::run(config::merge(a, cfg)?),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting the worker pool")?;
    pool.install(|| run(cli))
}
