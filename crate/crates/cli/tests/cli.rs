use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use antispoof_core::formats::{read_features, write_features};
use antispoof_core::{FeatureKind, FeatureMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn antispoof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antispoof")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small toy corpus and shortens its training config.
fn toy(dir: &Path, seed: u64) -> PathBuf {
    let corpus = dir.join("corpus");
    let seed = seed.to_string();
    let o = antispoof(&[
        "make-toy", "--out", s(&corpus), "--seed", &seed, "--genuine", "6", "--spoofed", "6", "--seconds", "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = corpus.join("toy.cfg");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("max_epochs = 20", "max_epochs = 3");
    std::fs::write(&cfg, text).unwrap();
    corpus
}

#[test]
fn extract_writes_one_cache_file_per_utterance_and_skips_existing() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy(dir.path(), 1);
    let feats = dir.path().join("feats");
    let manifest = corpus.join("toy.train.txt");
    let audio = corpus.join("audio");
    let args = [
        "extract", "--manifest", s(&manifest), "--audio-dir", s(&audio), "--feature", "logspec", "--out",
        s(&feats),
    ];
    let o = antispoof(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("12 written, 0 skipped, 0 failed"));

    let mut files: Vec<PathBuf> = std::fs::read_dir(&feats).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 12);
    for f in &files {
        assert!(f.to_str().unwrap().ends_with(".logspec.feat"));
        let m: FeatureMatrix<f32> = read_features(f).unwrap();
        assert_eq!(m.shape(), (401, 566));
    }
    let stamps: Vec<_> = files.iter().map(|f| std::fs::metadata(f).unwrap().modified().unwrap()).collect();

    let again = antispoof(&args);
    assert!(again.status.success());
    assert!(stdout(&again).contains("0 written, 12 skipped"));
    let after: Vec<_> = files.iter().map(|f| std::fs::metadata(f).unwrap().modified().unwrap()).collect();
    assert_eq!(stamps, after);

    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(stdout(&antispoof(&forced)).contains("12 written"));
}

#[test]
fn extract_reports_missing_audio() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy(dir.path(), 2);
    let manifest = corpus.join("toy.dev.txt");
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text.push_str("TOY_0000 TOY_MISSING - - bonafide\n");
    std::fs::write(&manifest, text).unwrap();
    let o = antispoof(&[
        "extract", "--manifest", s(&manifest), "--audio-dir", s(&corpus.join("audio")), "--feature", "lfbank", "--out",
        s(&dir.path().join("f")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("failed TOY_MISSING"), "{}", stderr(&o));
    assert!(stdout(&o).contains("12 written, 0 skipped, 1 failed"));
}

#[test]
fn training_is_deterministic_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy(dir.path(), 3);
    let cfg = corpus.join("toy.cfg");
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = antispoof(&["train", "--config", s(&cfg), "--out", s(&out), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", "7"), run("b", "7"), run("c", "8"));
    for f in ["model.ckpt", "dev.scores", "eval.scores", "train.log", "config.used"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    for f in ["model.ckpt", "dev.scores", "eval.scores"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_ne!(std::fs::read(a.join("model.ckpt")).unwrap(), std::fs::read(c.join("model.ckpt")).unwrap());

    let used = std::fs::read_to_string(a.join("config.used")).unwrap();
    assert!(used.lines().any(|l| l == "lr = 0.000395"), "{used}");
    assert!(used.lines().any(|l| l == "seed = 7"));
    let log = std::fs::read_to_string(a.join("train.log")).unwrap();
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert_eq!(std::fs::read_to_string(a.join("eval.scores")).unwrap().lines().count(), 12);

    // scoring the eval list with the checkpoint reproduces the training run's file
    let rescored = dir.path().join("rescored");
    let o = antispoof(&[
        "score", "--checkpoint", s(&a.join("model.ckpt")), "--manifest", s(&corpus.join("toy.eval.txt")),
        "--audio-dir", s(&corpus.join("audio")), "--config", s(&cfg), "--out", s(&rescored),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(rescored).unwrap(), std::fs::read(a.join("eval.scores")).unwrap());

    let o = antispoof(&["eer", "--scores", s(&a.join("dev.scores")), "--manifest", s(&corpus.join("toy.dev.txt"))]);
    assert!(o.status.success());
    let pct: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=100.0).contains(&pct));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mode = snn\nlearning_rate = 0.1\n").unwrap();
    let o = antispoof(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));

    let o = antispoof(&["train", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    let o = antispoof(&["eer", "--scores", "a", "--manifest", "b", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_finite_features_exit_with_divergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy(dir.path(), 4);
    let feats = dir.path().join("feats");
    std::fs::create_dir_all(&feats).unwrap();
    let manifests = ["toy.train.txt", "toy.dev.txt"];
    for m in manifests {
        for line in std::fs::read_to_string(corpus.join(m)).unwrap().lines() {
            let id = line.split_whitespace().nth(1).unwrap();
            let mut data = Array2::<f32>::zeros((80, 34));
            data[[0, 0]] = f32::NAN;
            write_features(&feats.join(format!("{id}.lfbank.feat")), &FeatureMatrix::new(FeatureKind::Lfbank, data))
                .unwrap();
        }
    }
    let cfg = dir.path().join("nan.cfg");
    std::fs::write(
        &cfg,
        format!(
            "stage_filters = 4,4,4,4\nstage_blocks = 1,1,1,1\nbatch_size = 4\nnum_samples = 8\n\
             train_manifest = {0}/toy.train.txt\ndev_manifest = {0}/toy.dev.txt\nfeature_dir = {1}\n",
            s(&corpus),
            s(&feats)
        ),
    )
    .unwrap();
    let o = antispoof(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

fn write_manifest_and_scores(dir: &Path, labels: &[bool], scores: &[f64], name: &str) -> (PathBuf, PathBuf) {
    let manifest = dir.join("m.txt");
    let mut m = String::new();
    let mut sc = String::new();
    for (i, (&spoof, &score)) in labels.iter().zip(scores).enumerate() {
        m += &format!("SPK U{i:04} - - {}\n", if spoof { "spoof" } else { "bonafide" });
        sc += &format!("U{i:04} {score:.12e}\n");
    }
    std::fs::write(&manifest, m).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, sc).unwrap();
    (manifest, path)
}

fn eer_cli(manifest: &Path, scores: &Path) -> String {
    let o = antispoof(&["eer", "--scores", s(scores), "--manifest", s(manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o).trim().to_string()
}

/// Tries every distinct score as a threshold and interpolates at the crossing.
fn brute_force_eer(genuine: &[f64], spoofed: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = genuine.iter().chain(spoofed).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    thresholds.insert(0, f64::NEG_INFINITY);
    let rate = |t: f64| {
        let far = genuine.iter().filter(|&&g| g > t).count() as f64 / genuine.len() as f64;
        let frr = spoofed.iter().filter(|&&x| x <= t).count() as f64 / spoofed.len() as f64;
        (far, frr)
    };
    for w in thresholds.windows(2) {
        let ((fa0, fr0), (fa1, fr1)) = (rate(w[0]), rate(w[1]));
        if fr1 >= fa1 {
            let (d0, d1) = (fa0 - fr0, fa1 - fr1);
            let lambda = if d0 == d1 { 0.0 } else { d0 / (d0 - d1) };
            return fa0 + lambda * (fa1 - fa0);
        }
    }
    0.0
}

#[test]
fn eer_command_prints_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let labels = [false, false, true, true];
    let (m, perfect) = write_manifest_and_scores(dir.path(), &labels, &[0.1, 0.2, 0.8, 0.9], "p");
    assert_eq!(eer_cli(&m, &perfect), "0.00");
    let (m, chance) = write_manifest_and_scores(dir.path(), &labels, &[0.5; 4], "c");
    assert_eq!(eer_cli(&m, &chance), "50.00");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<bool> = (0..150).map(|i| i % 3 == 0).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&sp| rng.random_range(0.0..1.0) + if sp { 0.4 } else { 0.0 })
        .collect();
    let (m, random) = write_manifest_and_scores(dir.path(), &labels, &scores, "r");
    let g: Vec<f64> = labels.iter().zip(&scores).filter(|(l, _)| !**l).map(|(_, &v)| v).collect();
    let sp: Vec<f64> = labels.iter().zip(&scores).filter(|(l, _)| **l).map(|(_, &v)| v).collect();
    assert_eq!(eer_cli(&m, &random), format!("{:.2}", brute_force_eer(&g, &sp) * 100.0));

    let curve = dir.path().join("curve.txt");
    let o = antispoof(&["eer", "--scores", s(&random), "--manifest", s(&m), "--curve", s(&curve)]);
    assert!(o.status.success());
    let points: Vec<(f64, f64)> = std::fs::read_to_string(&curve)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        })
        .collect();
    assert_eq!(points.first(), Some(&(1.0, 0.0)));
    assert_eq!(points.last(), Some(&(0.0, 1.0)));
}

#[test]
fn eer_names_the_first_unknown_id() {
    let dir = tempfile::tempdir().unwrap();
    let (m, scores) = write_manifest_and_scores(dir.path(), &[false, true], &[0.1, 0.9], "s");
    let mut text = std::fs::read_to_string(&scores).unwrap();
    text.push_str("STRAY_01 0.5\nSTRAY_02 0.5\n");
    std::fs::write(&scores, text).unwrap();
    let o = antispoof(&["eer", "--scores", s(&scores), "--manifest", s(&m)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("STRAY_01") && !stderr(&o).contains("STRAY_02"));
}

#[test]
fn fuse_writes_model_and_fused_scores() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels: Vec<bool> = (0..200).map(|i| i % 2 == 1).collect();
    let good: Vec<f64> = labels.iter().map(|&sp| rng.random_range(0.0..1.0) + if sp { 0.7 } else { 0.0 }).collect();
    let noise: Vec<f64> = labels.iter().map(|_| rng.random_range(0.0..1.0)).collect();
    let (m, a) = write_manifest_and_scores(dir.path(), &labels, &good, "a");
    let (_, b) = write_manifest_and_scores(dir.path(), &labels, &noise, "b");
    let out = dir.path().join("fused");
    let o = antispoof(&[
        "fuse", "--manifest", s(&m), "--dev", s(&a), "--dev", s(&b), "--eval", s(&a), "--eval", s(&b), "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = std::fs::read_to_string(out.join("fusion.model")).unwrap();
    assert_eq!(model.lines().count(), 3);
    assert_eq!(
        std::fs::read(out.join("dev.fused.scores")).unwrap(),
        std::fs::read(out.join("eval.fused.scores")).unwrap()
    );
    let fused: f64 = eer_cli(&m, &out.join("dev.fused.scores")).parse().unwrap();
    let single: f64 = eer_cli(&m, &a).parse().unwrap();
    assert!(fused <= single + 0.5 + 1e-9, "{fused} vs {single}");

    let o = antispoof(&["fuse", "--manifest", s(&m), "--dev", s(&a), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}
