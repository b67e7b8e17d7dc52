//! `hoi`: synthetic corpora, feature extraction, training, evaluation,
//! hyperparameter search, k-fold validation and the model ladder.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoi_core::nn::{ClassWeighting, ModelKind};

use config::{Patience, Widths};

#[derive(Debug, Parser)]
#[command(name = "hoi", version, about)]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Optional `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scripted synthetic corpus in manifest format.
    Synth(SynthArgs),
    /// Turn a manifest corpus into features.csv.
    Extract(ExtractArgs),
    /// Train one model on a stratified split and report on the test part.
    Train(TrainArgs),
    /// Score a checkpoint on the test part of the same split.
    Eval(EvalArgs),
    /// Random search over the static Bi-RNN.
    Search(SearchArgs),
    /// Stratified k-fold validation of one model.
    Xval(XvalArgs),
    /// Run the eight-model ladder.
    Ladder(LadderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub hand_radius: Option<f64>,
    /// Pixels per frame while approaching.
    #[arg(long)]
    pub approach_speed: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Std-dev of the hand-centre jitter in pixels.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Flip probability for boundary mask pixels.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub idle: Option<usize>,
    #[arg(long)]
    pub approach: Option<usize>,
    #[arg(long)]
    pub grab: Option<usize>,
    #[arg(long)]
    pub hold: Option<usize>,
    #[arg(long)]
    pub release: Option<usize>,
    #[arg(long)]
    pub retreat: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// Minimum Laplacian variance of a keyframe.
    #[arg(long)]
    pub tau_sharp: Option<f64>,
    /// Minimum mean squared difference to the previous frame.
    #[arg(long)]
    pub tau_diff: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Contact distance in pixels.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory searched recursively for manifest.csv files.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ModelArgs {
    /// mlp, birnn or lstm.
    #[arg(long)]
    pub arch: Option<ModelKind>,
    /// MLP hidden widths, e.g. 128,64,32.
    #[arg(long)]
    pub hidden: Option<Widths>,
    #[arg(long)]
    pub units: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub seq_length: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Batch normalization (default: on for the MLP, off for recurrent models).
    #[arg(long)]
    pub batchnorm: Option<bool>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct FitArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience in epochs, or `none`.
    #[arg(long)]
    pub patience: Option<Patience>,
    /// balanced or none.
    #[arg(long)]
    pub class_weight: Option<ClassWeighting>,
    #[arg(long)]
    pub standardize: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Score every row instead of the test split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct XvalArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Run the eight models on parallel threads.
    #[arg(long)]
    pub parallel: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
