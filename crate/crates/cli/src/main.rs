mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "hsmcfl", version, about = "Hard-sample-mining contrastive feature learning for imbalanced fault diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Run configuration (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// KEY=VALUE with a dotted key, e.g. train.epochs=5. Repeatable; commas separate several.
    #[arg(long = "override", value_name = "K=V")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Root seed (replaces train.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a spec file.
    Generate {
        /// Synthetic spec (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the generator seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one pipeline and write checkpoints, report and exports.
    Train(Common),
    /// Score saved checkpoints on the test split of a prepared dataset.
    Evaluate {
        /// Dataset CSV written by `train` (its metadata sidecar carries the split).
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding encoder.ckpt and classifier.ckpt.
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the four ablation cells over several seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Seeds per cell (replaces `repeats` from the config).
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Dump first-stage mined batches with provenance as JSON lines.
    MineDebug(Common),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate { config, out, seed } => commands::generate(&config, &out, seed),
        Command::Train(c) => commands::train(&c),
        Command::Evaluate {
            dataset,
            checkpoints,
            out,
        } => commands::evaluate(&dataset, &checkpoints, &out),
        Command::Ablate { common, repeats } => commands::ablate(&common, repeats),
        Command::MineDebug(c) => commands::mine_debug(&c),
    }
}
