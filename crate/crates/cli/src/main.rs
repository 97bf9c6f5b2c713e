use std::path::PathBuf;
use std::process::ExitCode;

use antispoof_core::{Error, FeatureKind};
use clap::{Args, Parser, Subcommand};

mod commands;

/// Replay-attack countermeasure: feature extraction, training, scoring and evaluation.
#[derive(Debug, Parser)]
#[command(name = "antispoof", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute and cache features for every utterance in a manifest.
    Extract(ExtractArgs),
    /// Write a small synthetic genuine/replayed corpus with manifests and a config.
    MakeToy(MakeToyArgs),
    /// Train a model from a config file.
    Train(TrainArgs),
    /// Score a manifest with a trained checkpoint.
    Score(ScoreArgs),
    /// Print the EER (%) of a score file.
    Eer(EerArgs),
    /// Fit logistic-regression fusion on dev scores and apply it.
    Fuse(FuseArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub feature: FeatureKind,
    /// Cache directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Take front-end settings (buffer length, window, filters) from a training config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recompute files that already exist.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct MakeToyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Genuine utterances per subset.
    #[arg(long, default_value_t = 20)]
    pub genuine: usize,
    /// Spoofed utterances per subset.
    #[arg(long, default_value_t = 20)]
    pub spoofed: usize,
    #[arg(long, default_value_t = 1.0)]
    pub seconds: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the checkpoint, log and score files.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Feature cache written by `extract`.
    #[arg(long)]
    pub feature_dir: Option<PathBuf>,
    /// Front-end settings; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Score file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EerArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also write the (FAR, FRR) trace here.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Dev-set labels the fusion weights are fitted on.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dev score file of one subsystem; repeat once per subsystem.
    #[arg(long = "dev", required = true)]
    pub dev: Vec<PathBuf>,
    /// Eval score files, in the same subsystem order as --dev.
    #[arg(long = "eval")]
    pub eval: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Marks an error as a usage problem (exit code 1) rather than a data problem.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidConfig(_) => 1,
                Error::TrainingDiverged { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::MakeToy(a) => commands::make_toy(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eer(a) => commands::eer(a),
        Command::Fuse(a) => commands::fuse(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
