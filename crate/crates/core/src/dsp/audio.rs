use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::AudioBuffer;

/// Truncates or zero-pads the END of `audio` to exactly `round(buffer_secs * sample_rate)` samples.
pub fn cut_or_pad<T: Real>(audio: &AudioBuffer<T>, buffer_secs: f64) -> Result<AudioBuffer<T>> {
    if audio.is_empty() {
        return Err(Error::InvalidAudio("zero-length audio".into()));
    }
    if audio.sample_rate == 0 {
        return Err(Error::InvalidAudio("sample rate must be positive".into()));
    }
    if !(buffer_secs > 0.0) {
        return Err(Error::InvalidConfig(format!("buffer length must be positive, got {buffer_secs}")));
    }
    let target = (buffer_secs * audio.sample_rate as f64).round() as usize;
    let mut samples = audio.samples.clone();
    samples.resize(target, T::zero());
    Ok(AudioBuffer::new(samples, audio.sample_rate))
}

/// Reads a mono WAV (integer PCM or float) or FLAC file, scaled to [-1, 1].
pub fn read_audio(path: &Path) -> Result<AudioBuffer<f32>> {
    let is_flac = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("flac"));
    if is_flac {
        read_flac(path)
    } else {
        read_wav(path)
    }
}

fn read_wav(path: &Path) -> Result<AudioBuffer<f32>> {
    let bad = |e: hound::Error| Error::InvalidAudio(format!("{}: {e}", path.display()));
    let reader = hound::WavReader::open(path).map_err(bad)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidAudio(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(bad)?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(bad)?,
    };
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

fn read_flac(path: &Path) -> Result<AudioBuffer<f32>> {
    let bad = |e: claxon::Error| Error::InvalidAudio(format!("{}: {e}", path.display()));
    let mut reader = claxon::FlacReader::open(path).map_err(bad)?;
    let info = reader.streaminfo();
    if info.channels != 1 {
        return Err(Error::InvalidAudio(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            info.channels
        )));
    }
    let scale = 1.0 / (1u64 << (info.bits_per_sample - 1)) as f32;
    let samples = reader
        .samples()
        .map(|s| s.map(|v| v as f32 * scale))
        .collect::<Result<Vec<_>, _>>()
        .map_err(bad)?;
    Ok(AudioBuffer::new(samples, info.sample_rate))
}

/// Writes 16-bit PCM mono WAV; samples are clipped to [-1, 1].
pub fn write_wav_pcm16<T: Real>(path: &Path, audio: &AudioBuffer<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let bad = |e: hound::Error| Error::InvalidAudio(format!("{}: {e}", path.display()));
    let mut writer = hound::WavWriter::create(path, spec).map_err(bad)?;
    for &s in &audio.samples {
        let v = (s.as_f64().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(bad)?;
    }
    writer.finalize().map_err(bad)
}
