use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::SAMPLE_RATE;

use super::{AudioBuffer, StftConfig};

/// Symmetric Hamming window.
pub fn hamming<T: Real>(len: usize) -> Vec<T> {
    if len == 1 {
        return vec![T::one()];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| T::lit(0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
        .collect()
}

/// Frame geometry shared by every feature kind.
pub(crate) struct Framing {
    pub window: usize,
    pub hop: usize,
    pub frames: usize,
}

pub(crate) fn framing<T: Real>(audio: &AudioBuffer<T>, cfg: &StftConfig) -> Result<Framing> {
    cfg.validate()?;
    if audio.sample_rate != SAMPLE_RATE {
        return Err(Error::InvalidAudio(format!(
            "sample rate {} Hz is not supported; resample to {} Hz first",
            audio.sample_rate, SAMPLE_RATE
        )));
    }
    let window = cfg.window_samples(audio.sample_rate);
    let hop = cfg.hop_samples(audio.sample_rate);
    if audio.len() < window {
        return Err(Error::InvalidAudio(format!(
            "audio has {} samples, shorter than one {window}-sample window",
            audio.len()
        )));
    }
    Ok(Framing {
        window,
        hop,
        frames: audio.len() / hop,
    })
}

/// Copies frame `i` (zero-padded past the end of the signal) into `out`, without windowing.
pub(crate) fn raw_frame<T: Real>(samples: &[T], f: &Framing, i: usize, out: &mut [T]) {
    let start = i * f.hop;
    for (n, o) in out.iter_mut().enumerate() {
        *o = samples.get(start + n).copied().unwrap_or_else(T::zero);
    }
}

/// Complex STFT, `bins × frames`, with frame `i` starting at `i * hop`.
pub fn stft<T: Real>(audio: &AudioBuffer<T>, cfg: &StftConfig) -> Result<Array2<Complex<T>>> {
    let f = framing(audio, cfg)?;
    let bins = f.window / 2 + 1;
    let win = hamming::<T>(f.window);
    let fft = FftPlanner::<T>::new().plan_fft_forward(f.window);
    let mut raw = vec![T::zero(); f.window];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); f.window];
    let mut out = Array2::from_elem((bins, f.frames), Complex::new(T::zero(), T::zero()));
    for i in 0..f.frames {
        raw_frame(&audio.samples, &f, i, &mut raw);
        for ((b, &x), &w) in buf.iter_mut().zip(&raw).zip(&win) {
            *b = Complex::new(x * w, T::zero());
        }
        fft.process(&mut buf);
        for k in 0..bins {
            out[[k, i]] = buf[k];
        }
    }
    Ok(out)
}
