//! Feature cache: `kind: u8`, `bins: u32 LE`, `frames: u32 LE`, then row-major `f32 LE`.

use std::path::Path;

use ndarray::Array2;

use crate::dsp::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

const HEADER_LEN: usize = 9;

pub fn encode_features<T: Real>(feat: &FeatureMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * feat.data.len());
    out.push(feat.kind.tag());
    out.extend_from_slice(&(feat.bins() as u32).to_le_bytes());
    out.extend_from_slice(&(feat.frames() as u32).to_le_bytes());
    for &v in feat.data.iter() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    out
}

pub fn decode_features<T: Real>(bytes: &[u8]) -> Result<FeatureMatrix<T>> {
    let bad = |m: String| Error::InvalidInput(format!("feature cache: {m}"));
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header".into()));
    }
    let kind = FeatureKind::from_tag(bytes[0]).ok_or_else(|| bad(format!("unknown kind tag {}", bytes[0])))?;
    let bins = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * bins * frames {
        return Err(bad(format!(
            "expected {} payload bytes for {bins}x{frames}, found {}",
            4 * bins * frames,
            body.len()
        )));
    }
    let values: Vec<T> = body
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    let data = Array2::from_shape_vec((bins, frames), values).expect("length checked");
    Ok(FeatureMatrix::new(kind, data))
}

pub fn write_features<T: Real>(path: &Path, feat: &FeatureMatrix<T>) -> Result<()> {
    std::fs::write(path, encode_features(feat)).map_err(|e| Error::io(path, e))
}

pub fn read_features<T: Real>(path: &Path) -> Result<FeatureMatrix<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}
