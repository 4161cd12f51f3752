//! `charie` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use charie::pipeline::{cmd_evaluate, cmd_extract, cmd_generate, cmd_train, PipelineConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "charie", version, about = "Extract time-series relations from short financial texts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file with flat keys; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, store, symbol table and constraints.
    Generate(Common),
    /// Train the network and the fusion gate.
    Train(Common),
    /// Run the full pipeline and write accepted extractions.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Documents to process (JSON lines); defaults to the corpus.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output path; defaults to the configured extractions file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate on the test split against the threshold-only baseline.
    Evaluate(Common),
}

fn load(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Generate(common) => {
            let cfg = load(&common)?;
            let stats = cmd_generate(&cfg).context("generate failed")?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Train(common) => {
            let cfg = load(&common)?;
            let report = cmd_train(&cfg).context("train failed")?;
            eprintln!(
                "network split: {} candidates, {} excluded without a consistency label",
                report.network_candidates, report.network_label_excluded
            );
            eprintln!(
                "fusion split: {} candidates, {} without a consistency score",
                report.fusion_candidates, report.fusion_missing_score
            );
            for e in &report.history.epochs {
                eprintln!(
                    "epoch {:>3}  train {:.5}  validation {}",
                    e.epoch,
                    e.train_loss,
                    e.validation_loss.map_or("-".into(), |v| format!("{v:.5}"))
                );
            }
            println!("{}", serde_json::to_string_pretty(&report.fusion_weights)?);
        }
        Command::Extract { common, input, output } => {
            let cfg = load(&common)?;
            let input = input.unwrap_or_else(|| cfg.documents.clone());
            let output = output.unwrap_or_else(|| cfg.extractions.clone());
            let n = cmd_extract(&cfg, &input, &output).context("extract failed")?;
            eprintln!("{n} extractions written to {}", output.display());
        }
        Command::Evaluate(common) => {
            let cfg = load(&common)?;
            let report = cmd_evaluate(&cfg).context("evaluate failed")?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    eprintln!("done in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
