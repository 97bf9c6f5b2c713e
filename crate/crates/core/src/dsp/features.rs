use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::stft::{framing, hamming, raw_frame, stft};
use super::{cut_or_pad, AudioBuffer, FeatureKind, FeatureMatrix, GdConfig, StftConfig, LOG_FLOOR, SPECTRAL_FLOOR};

/// Everything needed to turn a raw recording into a network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    /// Buffer length in seconds; audio is cut or zero-padded at the end to this length.
    pub buffer_secs: f64,
    pub stft: StftConfig,
    pub gd: GdConfig,
    pub num_filters: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            buffer_secs: 8.5,
            stft: StftConfig::default(),
            gd: GdConfig::default(),
            num_filters: 80,
        }
    }
}

impl FrontendConfig {
    /// `(bins, frames)` the front end produces for `kind`.
    pub fn feature_shape(&self, kind: FeatureKind, sample_rate: u32) -> (usize, usize) {
        let len = (self.buffer_secs * sample_rate as f64).round() as usize;
        let frames = self.stft.num_frames(len, sample_rate);
        let bins = match kind {
            FeatureKind::Lfbank => self.num_filters,
            FeatureKind::Logspec | FeatureKind::Gdgram => self.stft.fft_bins(sample_rate),
        };
        (bins, frames)
    }
}

/// Buffer, extract and scale one utterance.
pub fn extract<T: Real>(audio: &AudioBuffer<T>, kind: FeatureKind, cfg: &FrontendConfig) -> Result<FeatureMatrix<T>> {
    let audio = cut_or_pad(audio, cfg.buffer_secs)?;
    let feat = match kind {
        FeatureKind::Logspec => logspec(&audio, &cfg.stft)?,
        FeatureKind::Lfbank => lfbank(&audio, &cfg.stft, cfg.num_filters)?,
        FeatureKind::Gdgram => gd_gram(&audio, &cfg.stft, &cfg.gd)?,
    };
    Ok(scale_to_unit_range(feat))
}

fn power<T: Real>(spec: &Array2<Complex<T>>) -> Array2<T> {
    spec.mapv(|c| c.norm_sqr())
}

/// Log power spectrogram `ln(|X|^2 + eps)`.
pub fn logspec<T: Real>(audio: &AudioBuffer<T>, cfg: &StftConfig) -> Result<FeatureMatrix<T>> {
    let floor = T::lit(LOG_FLOOR);
    let data = power(&stft(audio, cfg)?).mapv(|p| (p + floor).ln());
    Ok(FeatureMatrix::new(FeatureKind::Logspec, data))
}

/// Weight of a unit-peak triangle centred at `centre` with half-width `width`, evaluated at `f`.
pub fn triangle_weight(f: f64, centre: f64, width: f64) -> f64 {
    (1.0 - (f - centre).abs() / width).max(0.0)
}

/// `num_filters × fft_bins` matrix of triangles spaced evenly over [0, sample_rate / 2].
///
/// Filter `m` (1-based) peaks at `m * nyquist / (num_filters + 1)` and reaches zero at its
/// neighbours' centres, so every triangle has the same width in Hz.
pub fn linear_filterbank<T: Real>(num_filters: usize, fft_len: usize, sample_rate: u32) -> Result<Array2<T>> {
    let bins = fft_len / 2 + 1;
    if num_filters == 0 || num_filters > bins {
        return Err(Error::InvalidConfig(format!(
            "num_filters must lie in 1..={bins}, got {num_filters}"
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let spacing = nyquist / (num_filters + 1) as f64;
    let bin_hz = sample_rate as f64 / fft_len as f64;
    Ok(Array2::from_shape_fn((num_filters, bins), |(m, k)| {
        T::lit(triangle_weight(k as f64 * bin_hz, (m + 1) as f64 * spacing, spacing))
    }))
}

/// Log energies of linearly spaced triangular filters over the power spectrum.
pub fn lfbank<T: Real>(audio: &AudioBuffer<T>, cfg: &StftConfig, num_filters: usize) -> Result<FeatureMatrix<T>> {
    cfg.validate()?;
    let fft_len = cfg.window_samples(audio.sample_rate);
    let fb = linear_filterbank::<T>(num_filters, fft_len, audio.sample_rate)?;
    let pow = power(&stft(audio, cfg)?);
    let floor = T::lit(LOG_FLOOR);
    let data = fb.dot(&pow).mapv(|e| (e + floor).ln());
    Ok(FeatureMatrix::new(FeatureKind::Lfbank, data))
}

/// Modified group delay gram.
///
/// Per frame `x[n]` (Hamming windowed): `X = DFT(x)`, `Y = DFT(n x[n])`,
/// `tau = (X_R Y_R + X_I Y_I) / S^(2 alpha)` where `S` is the cepstrally smoothed
/// magnitude of `X`; the output is `sign(tau) |tau|^gamma`.
pub fn gd_gram<T: Real>(audio: &AudioBuffer<T>, cfg: &StftConfig, gd: &GdConfig) -> Result<FeatureMatrix<T>> {
    gd.validate()?;
    let f = framing(audio, cfg)?;
    let n = f.window;
    let bins = n / 2 + 1;
    let win = hamming::<T>(n);
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let zero = Complex::new(T::zero(), T::zero());
    let two_alpha = T::lit(2.0 * gd.alpha);
    let gamma = T::lit(gd.gamma);
    let floor = T::lit(LOG_FLOOR);
    let spec_floor = T::lit(SPECTRAL_FLOOR);
    let half = T::lit(0.5);
    let inv_n = T::one() / T::from_usize_lossy(n);

    let mut raw = vec![T::zero(); n];
    let mut xs = vec![zero; n];
    let mut ys = vec![zero; n];
    let mut cep = vec![zero; n];
    let mut out = Array2::zeros((bins, f.frames));

    for i in 0..f.frames {
        raw_frame(&audio.samples, &f, i, &mut raw);
        for (t, ((&r, &w), (x, y))) in raw.iter().zip(&win).zip(xs.iter_mut().zip(ys.iter_mut())).enumerate() {
            let v = r * w;
            *x = Complex::new(v, T::zero());
            *y = Complex::new(v * T::from_usize_lossy(t), T::zero());
        }
        fwd.process(&mut xs);
        fwd.process(&mut ys);

        match gd.lifter_len {
            Some(lifter) => {
                // real cepstrum of the log magnitude, low-quefrency lifter, back to a smooth log magnitude
                for (c, x) in cep.iter_mut().zip(&xs) {
                    *c = Complex::new(half * (x.norm_sqr() + floor).ln(), T::zero());
                }
                inv.process(&mut cep);
                for (q, c) in cep.iter_mut().enumerate() {
                    let keep = q < lifter || (q > 0 && n - q < lifter);
                    *c = if keep { Complex::new(c.re * inv_n, T::zero()) } else { zero };
                }
                fwd.process(&mut cep);
                for c in cep.iter_mut() {
                    *c = Complex::new(c.re.exp(), T::zero());
                }
            }
            None => {
                for (c, x) in cep.iter_mut().zip(&xs) {
                    *c = Complex::new(x.norm(), T::zero());
                }
            }
        }

        for k in 0..bins {
            let x = xs[k];
            let y = ys[k];
            let s = cep[k].re.max(spec_floor);
            let tau = (x.re * y.re + x.im * y.im) / s.powf(two_alpha);
            out[[k, i]] = tau.signum() * tau.abs().powf(gamma);
        }
    }
    // signum(0) is 1 for floats; keep exact zeros
    out.mapv_inplace(|v: T| if v.abs() == T::zero() { T::zero() } else { v });
    Ok(FeatureMatrix::new(FeatureKind::Gdgram, out))
}

/// Divides by the largest magnitude so entries lie in [-1, 1]. No mean or variance normalization.
pub fn scale_to_unit_range<T: Real>(mut feat: FeatureMatrix<T>) -> FeatureMatrix<T> {
    let m = feat.max_abs();
    if m > T::zero() {
        feat.data.mapv_inplace(|v| v / m);
    }
    feat
}
