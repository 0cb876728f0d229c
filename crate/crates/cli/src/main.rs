use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bodyid_core::harness::{self, ExperimentConfig, Runtime};
use bodyid_core::partitioner::ProbeSubset;
use bodyid_core::templates::Metric;
use clap::{Parser, Subcommand};

/// Body identification experiment harness.
#[derive(Debug, Parser)]
#[command(name = "bodyid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Similarity: cosine or euclidean.
    #[arg(long, global = true)]
    metric: Option<Metric>,

    /// Evaluate one probe subset instead of the configured list.
    #[arg(long, global = true)]
    subset: Option<ProbeSubset>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate training and evaluation worlds.
    Synth,
    /// Split the evaluation corpus into gallery and probe sets.
    Split,
    /// Train an embedding head on the training corpus.
    Train,
    /// Score probes against gallery templates and write reports.
    Eval,
    /// Run the ablation grid and write the delta table.
    Ablate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(m) = cli.metric {
        cfg.metric = m;
    }
    if let Some(s) = cli.subset {
        cfg.subsets = vec![s];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let rt = Runtime {
        workers: cli.workers,
    };
    let out = match cli.command {
        Command::Synth => harness::cmd_synth(&cfg, &rt)?,
        Command::Split => harness::cmd_split(&cfg, &rt)?,
        Command::Train => harness::cmd_train(&cfg, &rt)?,
        Command::Eval => {
            let out = harness::cmd_eval(&cfg, &rt)?;
            print!("{}", std::fs::read_to_string(out.dir.join("summary.csv"))?);
            out
        }
        Command::Ablate => {
            let (_, files) = harness::cmd_ablate(&cfg, &rt)?;
            print!("{}", std::fs::read_to_string(&files[1])?);
            return Ok(());
        }
    };
    eprintln!(
        "{}: wrote {} files to {}",
        out.stage,
        out.files.len(),
        out.dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
