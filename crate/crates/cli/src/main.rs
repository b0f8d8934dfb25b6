mod commands;
mod predictions;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interview_core::dataio::Split;
use interview_core::evaluator::ReportFormat;

use settings::ConfigFlags;

#[derive(Debug, Parser)]
#[command(name = "interview", version, about = "Multimodal interview assessment: synthesis, training, K-fold, prediction, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset with a planted ground truth.
    GenSynth(GenSynthArgs),
    /// Train one model on the train split, selecting on val.
    Train(ConfigFlags),
    /// K-fold cross-validation over train+val, with a fold-ensemble predictor.
    Kfold(ConfigFlags),
    /// Write per-subject scores for one split as CSV.
    Predict(PredictArgs),
    /// Score a predictions CSV against manifest labels.
    Eval(EvalArgs),
    /// Train one model per head count and report validation MSE.
    SweepHeads(SweepHeadsArgs),
    /// Train the 2×2 video/audio pooling grid.
    SweepPooling(ConfigFlags),
}

#[derive(Debug, clap::Args)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 64)]
    pub subjects: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label noise standard deviation.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1152)]
    pub video_dim: usize,
    #[arg(long, default_value_t = 768)]
    pub audio_dim: usize,
    #[arg(long, default_value_t = 4096)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub min_len: usize,
    #[arg(long, default_value_t = 16)]
    pub max_len: usize,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// One checkpoint, or several to average as a fold ensemble.
    #[arg(long, required = true, num_args = 1..)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: SplitArg,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, clap::Args)]
pub struct SweepHeadsArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128")]
    pub values: Vec<usize>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitArg(pub Split);

impl std::str::FromStr for SplitArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(SplitArg(Split::Train)),
            "val" => Ok(SplitArg(Split::Val)),
            "test" => Ok(SplitArg(Split::Test)),
            other => Err(format!("unknown split {other:?} (train, val, test)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FormatArg(pub ReportFormat);

impl std::str::FromStr for FormatArg {
    type Err = interview_core::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(FormatArg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenSynth(a) => commands::gen_synth(&a),
        Command::Train(f) => commands::train(&f),
        Command::Kfold(f) => commands::kfold(&f),
        Command::Predict(a) => commands::predict(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::SweepHeads(a) => commands::sweep_heads(&a),
        Command::SweepPooling(f) => commands::sweep_pooling(&f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
