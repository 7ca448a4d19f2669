use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod manifest;
mod svg;

#[derive(Parser, Debug)]
#[command(name = "behman", version, about = "Behavior-manifold learning from speech: extract, sample, train, embed, evaluate")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML pipeline configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every available core, 1 runs sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Audio (WAV file, directory of WAVs, or list file) to 420-dim analysis frames.
    Extract(commands::ExtractArgs),
    /// Context pairs and triplet tuples from a feature directory.
    Sample(commands::SampleArgs),
    /// Train one network variant on sampled tuples.
    Train(commands::TrainArgs),
    /// Encode feature files into 64-dim embeddings.
    Embed(commands::EmbedArgs),
    /// Leave-one-group-out session classification by 1-NN and majority vote.
    EvalKnn(commands::EvalArgs),
    /// Per-frame behavior scores from the top-N labeled neighbors.
    Trajectory(commands::TrajectoryArgs),
    /// Cross-file nearest-frame similarity matrix.
    Confusion(commands::ConfusionArgs),
    /// Generate a synthetic labeled corpus and an unlabeled training corpus.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = commands::classify_error(&e);
            let report = serde_json::json!({
                "error": kind,
                "message": format!("{e:#}"),
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
