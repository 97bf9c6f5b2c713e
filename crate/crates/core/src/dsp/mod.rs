//! Audio front end: fixed-length buffering, STFT and the three feature kinds.

mod audio;
mod features;
mod stft;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use audio::{cut_or_pad, read_audio, write_wav_pcm16};
pub use features::{
    extract, gd_gram, lfbank, linear_filterbank, logspec, scale_to_unit_range, triangle_weight,
    FrontendConfig,
};
pub use stft::{hamming, stft};

/// Floor added inside every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;
/// Lower clamp on the smoothed magnitude spectrum before exponentiation.
pub const SPECTRAL_FLOOR: f64 = 1e-8;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Logspec,
    Lfbank,
    Gdgram,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Logspec, FeatureKind::Lfbank, FeatureKind::Gdgram];

    /// One-byte tag used by the feature cache header.
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Logspec => 0,
            FeatureKind::Lfbank => 1,
            FeatureKind::Gdgram => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureKind::Logspec),
            1 => Some(FeatureKind::Lfbank),
            2 => Some(FeatureKind::Gdgram),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Logspec => "logspec",
            FeatureKind::Lfbank => "lfbank",
            FeatureKind::Gdgram => "gdgram",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logspec" => Ok(FeatureKind::Logspec),
            "lfbank" => Ok(FeatureKind::Lfbank),
            "gdgram" | "gd" => Ok(FeatureKind::Gdgram),
            other => Err(Error::InvalidConfig(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// A time-frequency representation, `bins × frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub kind: FeatureKind,
    pub data: Array2<T>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(kind: FeatureKind, data: Array2<T>) -> Self {
        Self { kind, data }
    }

    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn cast<U: Real>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            kind: self.kind,
            data: self.data.mapv(|v| U::lit(v.as_f64())),
        }
    }
}

/// Short-time Fourier transform framing, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub window_len: f64,
    pub hop: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 0.050,
            hop: 0.015,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop > 0.0 && self.window_len > self.hop) {
            return Err(Error::InvalidConfig(format!(
                "stft requires window_len > hop > 0, got window_len={} hop={}",
                self.window_len, self.hop
            )));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_len * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop * sample_rate as f64).round() as usize
    }

    /// Number of non-negative frequency bins; the FFT length equals the window length.
    pub fn fft_bins(&self, sample_rate: u32) -> usize {
        self.window_samples(sample_rate) / 2 + 1
    }

    pub fn num_frames(&self, num_samples: usize, sample_rate: u32) -> usize {
        num_samples / self.hop_samples(sample_rate)
    }
}

/// Modified group delay parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    /// Exponent on the smoothed spectrum in the denominator.
    pub alpha: f64,
    /// Compression exponent applied to the group delay magnitude.
    pub gamma: f64,
    /// Number of low-quefrency cepstral coefficients kept when smoothing the
    /// magnitude spectrum. `None` disables smoothing and divides by `|X|` itself.
    pub lifter_len: Option<usize>,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            gamma: 0.9,
            lifter_len: Some(30),
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("gd alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gd gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.lifter_len == Some(0) {
            return Err(Error::InvalidConfig("gd lifter_len must be >= 1".into()));
        }
        Ok(())
    }
}
