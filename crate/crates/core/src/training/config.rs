use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dsp::{FeatureKind, FrontendConfig};
use crate::error::{Error, Result};
use crate::losses::{LossMode, LossWeights};
use crate::model::{ModelSpec, Pooling};
use crate::SAMPLE_RATE;

use super::TrainConfig;

/// Everything a `train` run needs, read from a flat `key = value` file.
///
/// Lines starting with `#` and blank lines are ignored; unknown keys are errors.
/// Relative paths are resolved against the directory given to [`ExperimentConfig::parse`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub loss: LossWeights,
    pub frontend: FrontendConfig,
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub eval_manifest: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub feature_dir: Option<PathBuf>,
    /// Load every utterance's features once before training.
    pub preload: bool,
}

const KEYS: &[&str] = &[
    "mode",
    "feature",
    "pooling",
    "with_decoder",
    "stage_filters",
    "stage_blocks",
    "decoder_filters",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "weight_decay",
    "batch_size",
    "eval_batch_size",
    "patience",
    "num_samples",
    "max_epochs",
    "seed",
    "center_update_rate",
    "track_train_eer",
    "cl_gamma",
    "rel_weight",
    "margin",
    "ce_pos_weight",
    "buffer_secs",
    "window_len",
    "hop",
    "num_filters",
    "gd_alpha",
    "gd_gamma",
    "gd_lifter",
    "train_manifest",
    "dev_manifest",
    "eval_manifest",
    "audio_dir",
    "feature_dir",
    "preload",
];

fn invalid(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("bad value `{value}` for `{key}`: {why}"))
}

fn num<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: std::fmt::Display,
{
    value.parse().map_err(|e| invalid(key, value, e))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn join(list: &[usize]) -> String {
    list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for a given mode and input feature: the full-size network, with a
    /// decoder exactly when the mode needs one.
    pub fn new(mode: LossMode, kind: FeatureKind, pooling: Pooling) -> Self {
        let frontend = FrontendConfig::default();
        let mut model = ModelSpec::new(kind, pooling, mode == LossMode::SnnRel);
        model.input_bins = frontend.feature_shape(kind, SAMPLE_RATE).0;
        Self {
            model,
            train: TrainConfig::for_mode(mode),
            loss: LossWeights::default(),
            frontend,
            train_manifest: None,
            dev_manifest: None,
            eval_manifest: None,
            audio_dir: None,
            feature_dir: None,
            preload: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::InvalidConfig(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if kv.insert(k, v).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }

        // these three pick the defaults everything else starts from
        let mode: LossMode = kv.get("mode").map_or(Ok(LossMode::Snn), |v| v.parse())?;
        let kind: FeatureKind = kv.get("feature").map_or(Ok(FeatureKind::Lfbank), |v| v.parse())?;
        let pooling: Pooling = kv.get("pooling").map_or(Ok(Pooling::Gap), |v| v.parse())?;
        let mut cfg = Self::new(mode, kind, pooling);

        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        for (&k, &v) in &kv {
            match k {
                "mode" | "feature" | "pooling" => {}
                "with_decoder" => cfg.model.with_decoder = flag(k, v)?,
                "stage_filters" => cfg.model.stage_filters = list(k, v)?,
                "stage_blocks" => cfg.model.stage_blocks = list(k, v)?,
                "decoder_filters" => cfg.model.decoder_filters = list(k, v)?,
                "lr" => cfg.train.lr = num(k, v)?,
                "beta1" => cfg.train.beta1 = num(k, v)?,
                "beta2" => cfg.train.beta2 = num(k, v)?,
                "adam_eps" => cfg.train.adam_eps = num(k, v)?,
                "weight_decay" => cfg.train.weight_decay = num(k, v)?,
                "batch_size" => cfg.train.batch_size = num(k, v)?,
                "eval_batch_size" => cfg.train.eval_batch_size = num(k, v)?,
                "patience" => cfg.train.patience = num(k, v)?,
                "num_samples" => cfg.train.num_samples = num(k, v)?,
                "max_epochs" => cfg.train.max_epochs = num(k, v)?,
                "seed" => cfg.train.seed = num(k, v)?,
                "center_update_rate" => cfg.train.center_update_rate = num(k, v)?,
                "track_train_eer" => cfg.train.track_train_eer = flag(k, v)?,
                "cl_gamma" => cfg.loss.cl_gamma = num(k, v)?,
                "rel_weight" => cfg.loss.rel_weight = num(k, v)?,
                "margin" => cfg.loss.margin = num(k, v)?,
                "ce_pos_weight" => cfg.loss.ce_pos_weight = num(k, v)?,
                "buffer_secs" => cfg.frontend.buffer_secs = num(k, v)?,
                "window_len" => cfg.frontend.stft.window_len = num(k, v)?,
                "hop" => cfg.frontend.stft.hop = num(k, v)?,
                "num_filters" => cfg.frontend.num_filters = num(k, v)?,
                "gd_alpha" => cfg.frontend.gd.alpha = num(k, v)?,
                "gd_gamma" => cfg.frontend.gd.gamma = num(k, v)?,
                "gd_lifter" => {
                    cfg.frontend.gd.lifter_len = match v {
                        "none" | "off" => None,
                        _ => Some(num(k, v)?),
                    }
                }
                "train_manifest" => cfg.train_manifest = Some(path(v)),
                "dev_manifest" => cfg.dev_manifest = Some(path(v)),
                "eval_manifest" => cfg.eval_manifest = Some(path(v)),
                "audio_dir" => cfg.audio_dir = Some(path(v)),
                "feature_dir" => cfg.feature_dir = Some(path(v)),
                "preload" => cfg.preload = flag(k, v)?,
                _ => unreachable!("key list and match arms disagree on `{k}`"),
            }
        }
        cfg.model.input_bins = cfg.frontend.feature_shape(kind, SAMPLE_RATE).0;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.loss.validate()?;
        self.frontend.stft.validate()?;
        self.frontend.gd.validate()?;
        if self.frontend.buffer_secs <= 0.0 || self.frontend.num_filters == 0 {
            return Err(Error::InvalidConfig("buffer_secs and num_filters must be positive".into()));
        }
        if self.train.mode == LossMode::SnnRel && !self.model.with_decoder {
            return Err(Error::InvalidConfig("snn_rel needs with_decoder = true".into()));
        }
        Ok(())
    }

    /// Writes the resolved settings back out in the format [`ExperimentConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let t = &self.train;
        let m = &self.model;
        let f = &self.frontend;
        let l = &self.loss;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("mode", t.mode.to_string());
        put("feature", m.input_kind.to_string());
        put("pooling", m.pooling.to_string());
        put("with_decoder", m.with_decoder.to_string());
        put("stage_filters", join(&m.stage_filters));
        put("stage_blocks", join(&m.stage_blocks));
        put("decoder_filters", join(&m.decoder_filters));
        put("lr", t.lr.to_string());
        put("beta1", t.beta1.to_string());
        put("beta2", t.beta2.to_string());
        put("adam_eps", t.adam_eps.to_string());
        put("weight_decay", t.weight_decay.to_string());
        put("batch_size", t.batch_size.to_string());
        put("eval_batch_size", t.eval_batch_size.to_string());
        put("patience", t.patience.to_string());
        put("num_samples", t.num_samples.to_string());
        put("max_epochs", t.max_epochs.to_string());
        put("seed", t.seed.to_string());
        put("center_update_rate", t.center_update_rate.to_string());
        put("track_train_eer", t.track_train_eer.to_string());
        put("cl_gamma", l.cl_gamma.to_string());
        put("rel_weight", l.rel_weight.to_string());
        put("margin", l.margin.to_string());
        put("ce_pos_weight", l.ce_pos_weight.to_string());
        put("buffer_secs", f.buffer_secs.to_string());
        put("window_len", f.stft.window_len.to_string());
        put("hop", f.stft.hop.to_string());
        put("num_filters", f.num_filters.to_string());
        put("gd_alpha", f.gd.alpha.to_string());
        put("gd_gamma", f.gd.gamma.to_string());
        put("gd_lifter", f.gd.lifter_len.map_or("none".to_string(), |v| v.to_string()));
        let paths = [
            ("train_manifest", &self.train_manifest),
            ("dev_manifest", &self.dev_manifest),
            ("eval_manifest", &self.eval_manifest),
            ("audio_dir", &self.audio_dir),
            ("feature_dir", &self.feature_dir),
        ];
        for (k, p) in paths {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("preload", self.preload.to_string());
        s
    }
}
