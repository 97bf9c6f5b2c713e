use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::dataset::UtteranceRecord;
use crate::dsp::{extract, read_audio, FeatureKind, FeatureMatrix, FrontendConfig};
use crate::error::{Error, Result};
use crate::formats::read_features;
use crate::scalar::Real;

/// Where training and scoring get their inputs from.
pub trait FeatureSource<T>: Sync {
    fn load(&self, record: &UtteranceRecord) -> Result<FeatureMatrix<T>>;
}

/// `<dir>/<utt_id>.<kind>.feat`
pub fn cache_path(dir: &Path, utt_id: &str, kind: FeatureKind) -> PathBuf {
    dir.join(format!("{utt_id}.{kind}.feat"))
}

/// Finds the audio file for a record. Manifests name `.flac` files, but a `.wav`
/// with the same stem is accepted in its place, and vice versa.
pub fn resolve_audio_path(audio_dir: &Path, record: &UtteranceRecord) -> Result<PathBuf> {
    let direct = audio_dir.join(&record.audio_path);
    if direct.is_file() {
        return Ok(direct);
    }
    for ext in ["flac", "wav"] {
        let alt = audio_dir.join(format!("{}.{ext}", record.utt_id));
        if alt.is_file() {
            return Ok(alt);
        }
    }
    Err(Error::InvalidDataset(format!(
        "no audio for `{}` under {}",
        record.utt_id,
        audio_dir.display()
    )))
}

/// Features held in memory, keyed by utterance id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryFeatures<T> {
    map: HashMap<String, FeatureMatrix<T>>,
}

impl<T: Real> InMemoryFeatures<T> {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    pub fn insert(&mut self, utt_id: impl Into<String>, feat: FeatureMatrix<T>) {
        self.map.insert(utt_id.into(), feat);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Loads every record from `source` once.
    pub fn preload(source: &dyn FeatureSource<T>, records: &[UtteranceRecord]) -> Result<Self> {
        let mut out = Self::new();
        for r in records {
            if !out.map.contains_key(&r.utt_id) {
                out.insert(r.utt_id.clone(), source.load(r)?);
            }
        }
        Ok(out)
    }
}

impl<T: Real> FeatureSource<T> for InMemoryFeatures<T> {
    fn load(&self, record: &UtteranceRecord) -> Result<FeatureMatrix<T>> {
        self.map
            .get(&record.utt_id)
            .cloned()
            .ok_or_else(|| Error::InvalidDataset(format!("no features for `{}`", record.utt_id)))
    }
}

/// Reads cached features, extracting from audio when no cache file exists.
#[derive(Debug, Clone)]
pub struct DiskFeatures {
    pub kind: FeatureKind,
    pub frontend: FrontendConfig,
    pub feature_dir: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
}

impl<T: Real> FeatureSource<T> for DiskFeatures {
    fn load(&self, record: &UtteranceRecord) -> Result<FeatureMatrix<T>> {
        if let Some(dir) = &self.feature_dir {
            let p = cache_path(dir, &record.utt_id, self.kind);
            if p.is_file() {
                let feat: FeatureMatrix<T> = read_features(&p)?;
                if feat.kind != self.kind {
                    return Err(Error::InvalidDataset(format!(
                        "{} holds {} features, expected {}",
                        p.display(),
                        feat.kind,
                        self.kind
                    )));
                }
                return Ok(feat);
            }
        }
        let Some(audio_dir) = &self.audio_dir else {
            return Err(Error::InvalidDataset(format!(
                "no cached features for `{}` and no audio directory configured",
                record.utt_id
            )));
        };
        let audio = read_audio(&resolve_audio_path(audio_dir, record)?)?;
        let audio = crate::dsp::AudioBuffer::new(
            audio.samples.iter().map(|&v| T::lit(v as f64)).collect(),
            audio.sample_rate,
        );
        extract(&audio, self.kind, &self.frontend)
    }
}
