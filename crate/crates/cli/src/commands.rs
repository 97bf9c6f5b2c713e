use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use antispoof_core::dataset::{make_toy_corpus, parse_manifest, ToyCorpusConfig};
use antispoof_core::dsp::{extract as extract_features, read_audio, FrontendConfig};
use antispoof_core::formats::{
    load_checkpoint, read_scores, save_checkpoint, write_curve, write_features, write_fusion_model, write_scores,
};
use antispoof_core::metrics::{apply_fusion, compute_eer, det_points, fit_fusion, split_by_label, FusionConfig};
use antispoof_core::training::{
    cache_path, resolve_audio_path, run_experiment, score_records, DiskFeatures, ExperimentData, FeatureSource,
    InMemoryFeatures,
};
use antispoof_core::{ExperimentConfig, Label, ModelF32, Subset, TrialScore, UtteranceRecord};
use rayon::prelude::*;

use crate::{EerArgs, ExtractArgs, FuseArgs, MakeToyArgs, ScoreArgs, TrainArgs, Usage};

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    if !path.is_file() {
        return Err(Usage(format!("config file {} not found", path.display())).into());
    }
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn frontend_from(config: Option<&Path>) -> Result<FrontendConfig> {
    Ok(match config {
        Some(p) => load_config(p)?.frontend,
        None => FrontendConfig::default(),
    })
}

fn labels_of(records: &[UtteranceRecord]) -> HashMap<String, Label> {
    records.iter().map(|r| (r.utt_id.clone(), r.label)).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

enum Outcome {
    Written,
    Skipped,
    Failed(String),
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let records = parse_manifest(&args.manifest, Subset::Train)?;
    let frontend = frontend_from(args.config.as_deref())?;
    create_dir(&args.out)?;

    let one = |r: &UtteranceRecord| -> antispoof_core::Result<bool> {
        let dest = cache_path(&args.out, &r.utt_id, args.feature);
        if dest.exists() && !args.force {
            return Ok(false);
        }
        let audio = read_audio(&resolve_audio_path(&args.audio_dir, r)?)?;
        let feat = extract_features(&audio, args.feature, &frontend)?;
        write_features(&dest, &feat)?;
        Ok(true)
    };
    let outcomes: Vec<(String, Outcome)> = records
        .par_iter()
        .map(|r| {
            let o = match one(r) {
                Ok(true) => Outcome::Written,
                Ok(false) => Outcome::Skipped,
                Err(e) => Outcome::Failed(e.to_string()),
            };
            (r.utt_id.clone(), o)
        })
        .collect();

    let written = outcomes.iter().filter(|o| matches!(o.1, Outcome::Written)).count();
    let skipped = outcomes.iter().filter(|o| matches!(o.1, Outcome::Skipped)).count();
    let failed: Vec<(&String, &String)> = outcomes
        .iter()
        .filter_map(|(id, o)| match o {
            Outcome::Failed(msg) => Some((id, msg)),
            _ => None,
        })
        .collect();
    println!("{written} written, {skipped} skipped, {} failed", failed.len());
    for (id, msg) in &failed {
        eprintln!("failed {id}: {msg}");
    }
    if !failed.is_empty() {
        bail!("{} of {} utterances could not be extracted", failed.len(), records.len());
    }
    Ok(())
}

fn toy_config_text(args: &MakeToyArgs) -> String {
    let n = args.genuine + args.spoofed;
    format!(
        "# tiny network on the synthetic corpus next to this file
mode = snn
feature = lfbank
pooling = gap
stage_filters = 8,8,16,16
stage_blocks = 1,1,1,1
batch_size = 8
num_samples = {n}
max_epochs = 20
patience = 5
eval_batch_size = 20
buffer_secs = {secs}
seed = {seed}
train_manifest = toy.train.txt
dev_manifest = toy.dev.txt
eval_manifest = toy.eval.txt
audio_dir = audio
",
        secs = args.seconds,
        seed = args.seed,
    )
}

pub fn make_toy(args: MakeToyArgs) -> Result<()> {
    if args.genuine == 0 || args.spoofed == 0 || !(args.seconds > 0.0) {
        return Err(Usage("--genuine, --spoofed and --seconds must be positive".into()).into());
    }
    create_dir(&args.out)?;
    for (offset, subset) in [Subset::Train, Subset::Dev, Subset::Eval].into_iter().enumerate() {
        let cfg = ToyCorpusConfig {
            seconds: args.seconds,
            ..ToyCorpusConfig::new(args.genuine, args.spoofed, args.seed + offset as u64, subset)
        };
        let recs = make_toy_corpus(&args.out, &cfg)?;
        println!("{subset}: {} utterances", recs.len());
    }
    let cfg_path = args.out.join("toy.cfg");
    std::fs::write(&cfg_path, toy_config_text(&args)).with_context(|| format!("writing {}", cfg_path.display()))?;
    println!("config: {}", cfg_path.display());
    Ok(())
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Usage(format!("config is missing `{key}`")).into())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    let train = parse_manifest(required(&cfg.train_manifest, "train_manifest")?, Subset::Train)?;
    let dev = parse_manifest(required(&cfg.dev_manifest, "dev_manifest")?, Subset::Dev)?;
    let eval = match &cfg.eval_manifest {
        Some(p) => Some(parse_manifest(p, Subset::Eval)?),
        None => None,
    };
    if cfg.audio_dir.is_none() && cfg.feature_dir.is_none() {
        return Err(Usage("config needs `audio_dir` or `feature_dir`".into()).into());
    }
    let disk = DiskFeatures {
        kind: cfg.model.input_kind,
        frontend: cfg.frontend.clone(),
        feature_dir: cfg.feature_dir.clone(),
        audio_dir: cfg.audio_dir.clone(),
    };
    let preloaded = if cfg.preload {
        let all: Vec<UtteranceRecord> = train.iter().chain(&dev).chain(eval.iter().flatten()).cloned().collect();
        Some(InMemoryFeatures::<f32>::preload(&disk, &all)?)
    } else {
        None
    };
    let source: &dyn FeatureSource<f32> = match &preloaded {
        Some(m) => m,
        None => &disk,
    };

    create_dir(&args.out)?;
    std::fs::write(args.out.join("config.used"), cfg.to_text())?;
    let log_path = args.out.join("train.log");
    let mut log = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    writeln!(log, "# epoch train_loss dev_eer epochs_since_best [train_eer]")?;
    let mut log_err = None;
    let data = ExperimentData {
        train: &train,
        dev: &dev,
        eval: eval.as_deref(),
    };
    let outcome = run_experiment(&cfg.model, &cfg.train, &cfg.loss, data, source, |entry| {
        eprintln!("epoch {entry}");
        if let Err(e) = writeln!(log, "{entry}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).context("writing train.log");
    }

    let out: &ModelF32 = &outcome.best_model;
    save_checkpoint(&args.out.join("model.ckpt"), out)?;
    write_scores(&args.out.join("dev.scores"), &outcome.dev_scores)?;
    if let Some(s) = &outcome.eval_scores {
        write_scores(&args.out.join("eval.scores"), s)?;
    }
    println!(
        "best epoch {} of {}, dev EER {:.2}%",
        outcome.best_epoch,
        outcome.history.len(),
        outcome.best_dev_eer * 100.0
    );
    Ok(())
}

pub fn score(args: ScoreArgs) -> Result<()> {
    if args.audio_dir.is_none() && args.feature_dir.is_none() {
        return Err(Usage("give --audio-dir or --feature-dir".into()).into());
    }
    let model: ModelF32 = load_checkpoint(&args.checkpoint)?;
    let records = parse_manifest(&args.manifest, Subset::Eval)?;
    let source = DiskFeatures {
        kind: model.spec.input_kind,
        frontend: frontend_from(args.config.as_deref())?,
        feature_dir: args.feature_dir,
        audio_dir: args.audio_dir,
    };
    let scores = score_records(&model, &records, &source, 16)?;
    write_scores(&args.out, &scores)?;
    println!("{} utterances scored", scores.len());
    Ok(())
}

/// Every scored id must be in the manifest and every manifest id must be scored.
fn check_coverage(scores: &[TrialScore], labels: &HashMap<String, Label>, records: &[UtteranceRecord]) -> Result<()> {
    if let Some(t) = scores.iter().find(|t| !labels.contains_key(&t.utt_id)) {
        bail!("`{}` is scored but not in the manifest", t.utt_id);
    }
    let scored: std::collections::HashSet<&str> = scores.iter().map(|t| t.utt_id.as_str()).collect();
    if let Some(r) = records.iter().find(|r| !scored.contains(r.utt_id.as_str())) {
        bail!("`{}` is in the manifest but has no score", r.utt_id);
    }
    Ok(())
}

pub fn eer(args: EerArgs) -> Result<()> {
    let scores = read_scores(&args.scores)?;
    let records = parse_manifest(&args.manifest, Subset::Eval)?;
    let labels = labels_of(&records);
    check_coverage(&scores, &labels, &records)?;
    let value = compute_eer(&scores, &labels)?;
    if let Some(path) = &args.curve {
        let (g, s) = split_by_label(&scores, &labels)?;
        write_curve(path, &det_points(&g, &s))?;
    }
    println!("{:.2}", value * 100.0);
    Ok(())
}

pub fn fuse(args: FuseArgs) -> Result<()> {
    if args.dev.len() < 2 {
        return Err(Usage("fusion needs at least two --dev score files".into()).into());
    }
    if !args.eval.is_empty() && args.eval.len() != args.dev.len() {
        return Err(Usage(format!("{} --dev files but {} --eval files", args.dev.len(), args.eval.len())).into());
    }
    let records = parse_manifest(&args.manifest, Subset::Dev)?;
    let labels = labels_of(&records);
    let dev = args.dev.iter().map(|p| read_scores(p)).collect::<antispoof_core::Result<Vec<_>>>()?;
    for (p, s) in args.dev.iter().zip(&dev) {
        check_coverage(s, &labels, &records).with_context(|| format!("in {}", p.display()))?;
    }
    let model = fit_fusion(&dev, &labels, &FusionConfig::default())?;

    create_dir(&args.out)?;
    write_fusion_model(&args.out.join("fusion.model"), &model)?;
    let fused_dev = apply_fusion(&model, &dev)?;
    write_scores(&args.out.join("dev.fused.scores"), &fused_dev)?;
    for (p, s) in args.dev.iter().zip(&dev) {
        println!("{}: dev EER {:.2}%", p.display(), compute_eer(s, &labels)? * 100.0);
    }
    println!("fused: dev EER {:.2}%", compute_eer(&fused_dev, &labels)? * 100.0);

    if !args.eval.is_empty() {
        let eval = args.eval.iter().map(|p| read_scores(p)).collect::<antispoof_core::Result<Vec<_>>>()?;
        write_scores(&args.out.join("eval.fused.scores"), &apply_fusion(&model, &eval)?)?;
    }
    Ok(())
}
