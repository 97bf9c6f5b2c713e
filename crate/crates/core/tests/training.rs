use std::collections::HashMap;

use antispoof_core::formats::{load_checkpoint, save_checkpoint};
use antispoof_core::metrics::compute_eer;
use antispoof_core::training::{
    run_experiment, score_records, ExperimentData, ExperimentOutcome, FeatureSource, InMemoryFeatures, Trainer,
};
use antispoof_core::{
    Error, FeatureKind, FeatureMatrix, Label, LossMode, LossWeights, Model, ModelSpec, Pooling, Subset, TrainConfig,
    UtteranceRecord,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BINS: usize = 16;
const FRAMES: usize = 12;

fn record(id: String, label: Label, subset: Subset) -> UtteranceRecord {
    UtteranceRecord {
        audio_path: format!("{id}.flac"),
        utt_id: id,
        label,
        subset,
    }
}

/// Noise with a class-dependent tilt across frequency rows.
fn synth_feature(rng: &mut ChaCha8Rng, label: Label) -> FeatureMatrix<f64> {
    let tilt = if label == Label::Genuine { 0.6 } else { -0.6 };
    let data = Array2::from_shape_fn((BINS, FRAMES), |(b, _)| {
        rng.random_range(-1.0..1.0) + tilt * (b as f64 / BINS as f64 - 0.5)
    });
    FeatureMatrix::new(FeatureKind::Lfbank, data)
}

struct Corpus {
    train: Vec<UtteranceRecord>,
    dev: Vec<UtteranceRecord>,
    feats: InMemoryFeatures<f64>,
}

fn corpus(n_gen: usize, n_spf: usize, n_dev: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = InMemoryFeatures::new();
    let mut make = |prefix: &str, n_gen: usize, n_spf: usize, subset: Subset, feats: &mut InMemoryFeatures<f64>| {
        (0..n_gen + n_spf)
            .map(|i| {
                let label = if i < n_gen { Label::Genuine } else { Label::Spoofed };
                let r = record(format!("{prefix}{i:03}"), label, subset);
                feats.insert(r.utt_id.clone(), synth_feature(&mut rng, label));
                r
            })
            .collect::<Vec<_>>()
    };
    let train = make("T", n_gen, n_spf, Subset::Train, &mut feats);
    let dev = make("D", n_dev, n_dev, Subset::Dev, &mut feats);
    Corpus { train, dev, feats }
}

fn spec_for(mode: LossMode) -> ModelSpec {
    ModelSpec::tiny(FeatureKind::Lfbank, BINS, Pooling::Gap, mode == LossMode::SnnRel, [2, 2, 2, 2])
}

fn small_cfg(mode: LossMode) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        num_samples: 16,
        max_epochs: 6,
        patience: 2,
        eval_batch_size: 8,
        ..TrainConfig::for_mode(mode)
    }
}

const MODES: [LossMode; 4] = [LossMode::Ce, LossMode::Cl, LossMode::Snn, LossMode::SnnRel];

#[test]
fn batch_objective_gradients_match_finite_differences() {
    for (k, mode) in MODES.into_iter().enumerate() {
        let c = corpus(4, 4, 1, 10 + k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(20 + k as u64);
        let mut model: Model<f64> = Model::new(spec_for(mode), 30 + k as u64).unwrap();
        for t in model.params.tensors_mut() {
            if t.trainable && (t.name.ends_with("gamma") || t.name.ends_with("beta") || t.name.ends_with("bias")) {
                t.value.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
            }
        }
        let weights = LossWeights {
            cl_gamma: 0.5,
            ..LossWeights::default()
        };
        let mut trainer = Trainer::new(model, small_cfg(mode), weights, &c.train).unwrap();
        // mixed labels; in Siamese modes rows 0..4 pair with rows 4..8
        let labels: Vec<Label> = c.train.iter().map(|r| r.label).collect();
        let labels = [labels[0], labels[5], labels[1], labels[6], labels[7], labels[2], labels[4], labels[3]];
        let feats: Vec<FeatureMatrix<f64>> = labels.iter().map(|&l| synth_feature(&mut rng, l)).collect();
        if mode == LossMode::Cl {
            // move the centroids away from zero with one real step
            trainer.train_batch(&feats, &labels).unwrap();
            assert!(trainer.centroids().unwrap().genuine.iter().any(|&v| v != 0.0));
        }
        let obj = trainer.batch_objective(&feats, &labels).unwrap();

        let h = 1e-5;
        let n_tensors = trainer.model.params.tensors().len();
        let mut checked = 0;
        for ti in 0..n_tensors {
            if !trainer.model.params.tensors()[ti].trainable {
                continue;
            }
            let name = trainer.model.params.tensors()[ti].name.clone();
            for j in 0..trainer.model.params.tensors()[ti].value.len() {
                let orig = trainer.model.params.tensors()[ti].value.as_slice().unwrap()[j];
                let mut at = |v: f64| {
                    trainer.model.params.tensors_mut()[ti].value.as_slice_mut().unwrap()[j] = v;
                    trainer.batch_objective(&feats, &labels).unwrap().loss
                };
                let numeric = (at(orig + h) - at(orig - h)) / (2.0 * h);
                at(orig);
                let analytic = obj.grads.0[ti].as_slice().unwrap()[j];
                let tol = 1e-4 * analytic.abs().max(numeric.abs()) + 1e-8;
                assert!(
                    (analytic - numeric).abs() <= tol,
                    "{}: {name}[{j}] analytic {analytic} vs numeric {numeric}",
                    mode.as_str()
                );
                checked += 1;
            }
        }
        assert_eq!(checked, trainer.model.num_params());
    }
}

#[test]
fn both_branches_share_parameters() {
    let c = corpus(4, 4, 1, 1);
    let model: Model<f64> = Model::new(spec_for(LossMode::Snn), 2).unwrap();
    let mut trainer = Trainer::new(model, small_cfg(LossMode::Snn), LossWeights::default(), &c.train).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = [Label::Genuine, Label::Spoofed, Label::Spoofed, Label::Genuine];
    let feats: Vec<_> = labels.iter().map(|&l| synth_feature(&mut rng, l)).collect();
    trainer.train_batch(&feats, &labels).unwrap();

    // the same utterance on both sides of every pair
    let same = [feats[0].clone(), feats[1].clone(), feats[0].clone(), feats[1].clone()];
    let same_labels = [labels[0], labels[1], labels[0], labels[1]];
    let obj = trainer.batch_objective(&same, &same_labels).unwrap();
    assert_eq!(obj.out.embeddings.row(0), obj.out.embeddings.row(2));
    assert_eq!(obj.out.embeddings.row(1), obj.out.embeddings.row(3));
    assert_eq!(obj.out.scores[0], obj.out.scores[2]);
}

#[test]
fn weight_decay_shrinks_parameters() {
    let c = corpus(8, 8, 1, 5);
    let norm_after_epoch = |wd: f64| {
        let model: Model<f64> = Model::new(spec_for(LossMode::Ce), 6).unwrap();
        let cfg = TrainConfig {
            weight_decay: wd,
            ..small_cfg(LossMode::Ce)
        };
        let mut trainer = Trainer::new(model, cfg, LossWeights::default(), &c.train).unwrap();
        trainer.train_epoch(0, &c.train, &c.feats).unwrap();
        trainer.model.params.trainable_sq_norm()
    };
    let (plain, decayed) = (norm_after_epoch(0.0), norm_after_epoch(1.0));
    assert!(decayed < plain, "{decayed} vs {plain}");
}

#[test]
fn non_finite_input_reports_divergence() {
    let c = corpus(4, 4, 1, 7);
    let model: Model<f64> = Model::new(spec_for(LossMode::Ce), 8).unwrap();
    let mut trainer = Trainer::new(model, small_cfg(LossMode::Ce), LossWeights::default(), &c.train).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = synth_feature(&mut rng, Label::Genuine);
    bad.data[[3, 4]] = f64::NAN;
    let feats = [bad, synth_feature(&mut rng, Label::Spoofed)];
    let err = trainer.train_batch(&feats, &[Label::Genuine, Label::Spoofed]).unwrap_err();
    assert!(matches!(err, Error::TrainingDiverged { step: 1 }), "{err}");
}

fn run(mode: LossMode, seed: u64, c: &Corpus) -> ExperimentOutcome<f64> {
    let cfg = TrainConfig {
        seed,
        ..small_cfg(mode)
    };
    let data = ExperimentData {
        train: &c.train,
        dev: &c.dev,
        eval: Some(&c.dev),
    };
    run_experiment(&spec_for(mode), &cfg, &LossWeights::default(), data, &c.feats, |_| {}).unwrap()
}

#[test]
fn best_epoch_is_the_minimum_of_the_history() {
    let c = corpus(6, 18, 6, 11);
    for mode in MODES {
        let out = run(mode, 12, &c);
        let min = out.history.iter().map(|l| l.dev_eer).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_dev_eer, min, "{}", mode.as_str());
        let first_min = out.history.iter().find(|l| l.dev_eer == min).unwrap();
        assert_eq!(out.best_epoch, first_min.epoch);
        assert!(out.history.len() <= 6);

        let labels: HashMap<String, Label> = c.dev.iter().map(|r| (r.utt_id.clone(), r.label)).collect();
        assert_eq!(compute_eer(&out.dev_scores, &labels).unwrap(), out.best_dev_eer);
        // eval was scored with the best model on the same records
        assert_eq!(out.eval_scores.as_deref(), Some(out.dev_scores.as_slice()));
    }
}

#[test]
fn runs_are_deterministic_and_score_every_utterance() {
    let c = corpus(6, 18, 6, 13);
    let a = run(LossMode::Ce, 4, &c);
    let b = run(LossMode::Ce, 4, &c);
    assert_eq!(a.history, b.history);
    assert_eq!(a.dev_scores, b.dev_scores);
    let ids: Vec<&str> = a.dev_scores.iter().map(|s| s.utt_id.as_str()).collect();
    let expected: Vec<&str> = c.dev.iter().map(|r| r.utt_id.as_str()).collect();
    assert_eq!(ids, expected);
    assert!(a.dev_scores.iter().all(|s| (0.0..=1.0).contains(&s.score)));

    let snn_a = run(LossMode::Snn, 4, &c);
    let snn_b = run(LossMode::Snn, 4, &c);
    assert_eq!(snn_a.history, snn_b.history);
}

#[test]
fn checkpoint_round_trip_keeps_scores_bit_identical() {
    // checkpoints hold f32 payloads, so bit identity is a property of f32 models
    let c = corpus(6, 6, 4, 17);
    let mut feats = InMemoryFeatures::<f32>::new();
    for r in c.train.iter().chain(&c.dev) {
        let f = c.feats.load(r).unwrap();
        feats.insert(r.utt_id.clone(), FeatureMatrix::new(f.kind, f.data.mapv(|v| v as f32)));
    }
    let model: Model<f32> = Model::new(spec_for(LossMode::SnnRel), 18).unwrap();
    let mut trainer = Trainer::new(model, small_cfg(LossMode::SnnRel), LossWeights::default(), &c.train).unwrap();
    trainer.train_epoch(0, &c.train, &feats).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &trainer.model).unwrap();
    let loaded: Model<f32> = load_checkpoint(&path).unwrap();
    let before = score_records(&trainer.model, &c.dev, &feats, 3).unwrap();
    let after = score_records(&loaded, &c.dev, &feats, 3).unwrap();
    for (x, y) in before.iter().zip(&after) {
        assert_eq!(x.score.to_bits(), y.score.to_bits());
    }
    assert_eq!(loaded.spec, trainer.model.spec);
}
