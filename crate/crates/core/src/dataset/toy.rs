//! Desk-scale synthetic corpus.
//!
//! Genuine utterances are harmonic tone complexes with a syllabic envelope and
//! content up to ~7.6 kHz. Spoofed utterances are generated the same way and then
//! passed through a simulated replay channel: 4 kHz low-pass FIR, exponentially
//! decaying reverberation (RT60 0.3 s) and white noise at 30 dB SNR.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp::{hamming, write_wav_pcm16, AudioBuffer};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

use super::{write_manifest, Label, Subset, UtteranceRecord};

const PEAK: f64 = 0.5;
const LOWPASS_HZ: f64 = 4_000.0;
const LOWPASS_TAPS: usize = 101;
const RT60_SECS: f64 = 0.3;
const SNR_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyCorpusConfig {
    pub n_genuine: usize,
    pub n_spoofed: usize,
    pub seed: u64,
    pub seconds: f64,
    pub subset: Subset,
}

impl ToyCorpusConfig {
    pub fn new(n_genuine: usize, n_spoofed: usize, seed: u64, subset: Subset) -> Self {
        Self {
            n_genuine,
            n_spoofed,
            seed,
            seconds: 1.0,
            subset,
        }
    }
}

fn normalize_peak(x: &mut [f64]) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= PEAK / m);
    }
}

/// Harmonic tone complex with vibrato and a syllable-like amplitude envelope.
pub fn synth_genuine(rng: &mut impl Rng, num_samples: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let dur = num_samples as f64 / sr;
    let f0 = rng.random_range(90.0..250.0);
    let vib_rate = rng.random_range(3.0..6.0);
    let vib_depth = rng.random_range(0.005..0.02);
    let top = 0.95 * sr / 2.0;
    let harmonics: Vec<(f64, f64)> = (1..)
        .take_while(|&h| h as f64 * f0 * (1.0 + vib_depth) < top)
        .map(|h| {
            let amp = rng.random_range(0.5..1.0) / (h as f64).powf(0.7);
            (amp, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let bumps: Vec<(f64, f64)> = (0..rng.random_range(3..6))
        .map(|_| (rng.random_range(0.0..dur), rng.random_range(0.05..0.2)))
        .collect();

    let mut phase = 0.0;
    let mut out = Vec::with_capacity(num_samples);
    for n in 0..num_samples {
        let t = n as f64 / sr;
        let env = 0.05
            + bumps
                .iter()
                .map(|&(c, w)| (-0.5 * ((t - c) / w).powi(2)).exp())
                .sum::<f64>();
        let v: f64 = harmonics
            .iter()
            .enumerate()
            .map(|(h, &(a, p))| a * ((h + 1) as f64 * phase + p).sin())
            .sum();
        out.push(env * v);
        phase += 2.0 * PI * f0 * (1.0 + vib_depth * (2.0 * PI * vib_rate * t).sin()) / sr;
    }
    normalize_peak(&mut out);
    out
}

fn convolve_same(x: &[f64], h: &[f64], delay: usize) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let n = n + delay;
            let lo = n.saturating_sub(x.len() - 1);
            let hi = n.min(h.len() - 1);
            (lo..=hi).map(|k| h[k] * x[n - k]).sum()
        })
        .collect()
}

/// Simulated loudspeaker-room-microphone replay path.
pub fn replay_channel(x: &[f64], rng: &mut impl Rng, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    // windowed-sinc low-pass
    let win = hamming::<f64>(LOWPASS_TAPS);
    let mid = (LOWPASS_TAPS / 2) as f64;
    let fc = LOWPASS_HZ / sr;
    let lp: Vec<f64> = (0..LOWPASS_TAPS)
        .map(|k| {
            let t = k as f64 - mid;
            let sinc = if t == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * t).sin() / (PI * t) };
            sinc * win[k]
        })
        .collect();
    let y = convolve_same(x, &lp, LOWPASS_TAPS / 2);

    // direct path plus an exponentially decaying diffuse tail
    let len = (RT60_SECS * sr) as usize;
    let decay = 3.0 * 10f64.ln() / RT60_SECS;
    let mut ir = vec![0.0; len];
    ir[0] = 1.0;
    for (k, v) in ir.iter_mut().enumerate().skip((0.001 * sr) as usize) {
        let g: f64 = rng.sample(StandardNormal);
        *v = 0.3 * g * (-decay * k as f64 / sr).exp();
    }
    let mut y = convolve_same(&y, &ir, 0);

    let power = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let noise_std = (power / 10f64.powf(SNR_DB / 10.0)).sqrt();
    for v in y.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v += noise_std * g;
    }
    normalize_peak(&mut y);
    y
}

/// Deterministic audio for utterance `index` of a corpus seeded with `seed`.
pub fn synth_toy_utterance(seed: u64, index: u64, label: Label, seconds: f64) -> AudioBuffer<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = (seconds * SAMPLE_RATE as f64).round() as usize;
    let mut x = synth_genuine(&mut rng, n, SAMPLE_RATE);
    if label == Label::Spoofed {
        x = replay_channel(&x, &mut rng, SAMPLE_RATE);
    }
    AudioBuffer::new(x.into_iter().map(|v| v as f32).collect(), SAMPLE_RATE)
}

fn subset_letter(subset: Subset) -> char {
    match subset {
        Subset::Train => 'T',
        Subset::Dev => 'D',
        Subset::Eval => 'E',
    }
}

/// Writes `<dir>/audio/<utt_id>.wav` files and `<dir>/toy.<subset>.txt`; returns the records.
pub fn make_toy_corpus(dir: &Path, cfg: &ToyCorpusConfig) -> Result<Vec<UtteranceRecord>> {
    if cfg.n_genuine == 0 || cfg.n_spoofed == 0 {
        return Err(Error::InvalidConfig("toy corpus needs at least one utterance per class".into()));
    }
    let audio_dir = dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    let labels = std::iter::repeat_n(Label::Genuine, cfg.n_genuine)
        .chain(std::iter::repeat_n(Label::Spoofed, cfg.n_spoofed));
    let mut records = Vec::with_capacity(cfg.n_genuine + cfg.n_spoofed);
    for (i, label) in labels.enumerate() {
        let utt_id = format!("TOY_{}_{:05}", subset_letter(cfg.subset), i);
        let audio = synth_toy_utterance(cfg.seed, i as u64, label, cfg.seconds);
        let audio_path = format!("{utt_id}.wav");
        write_wav_pcm16(&audio_dir.join(&audio_path), &audio)?;
        records.push(UtteranceRecord {
            utt_id,
            label,
            subset: cfg.subset,
            audio_path,
        });
    }
    write_manifest(&dir.join(format!("toy.{}.txt", cfg.subset)), &records)?;
    Ok(records)
}
