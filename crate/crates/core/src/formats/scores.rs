//! Score files (`utt_id score` per line), fusion model files and DET curve dumps.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{FusionModel, TrialScore};

pub fn write_scores(path: &Path, scores: &[TrialScore]) -> Result<()> {
    let mut text = String::new();
    for t in scores {
        let _ = writeln!(text, "{} {:.12e}", t.utt_id, t.score);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_scores(text: &str, origin: &str) -> Result<Vec<TrialScore>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg,
        };
        if cols.len() != 2 {
            return Err(err(format!("expected `utt_id score`, found {} columns", cols.len())));
        }
        let score: f64 = cols[1].parse().map_err(|_| err(format!("bad score `{}`", cols[1])))?;
        if !score.is_finite() {
            return Err(err(format!("non-finite score `{}`", cols[1])));
        }
        out.push(TrialScore::new(cols[0], score));
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Vec<TrialScore>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text, &path.display().to_string())
}

/// Bias on the first line, then one weight per subsystem.
pub fn write_fusion_model(path: &Path, model: &FusionModel) -> Result<()> {
    let mut text = format!("{:.17e}\n", model.bias);
    for w in &model.weights {
        let _ = writeln!(text, "{w:.17e}");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_fusion_model(path: &Path) -> Result<FusionModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let values: Vec<f64> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("bad number `{}`", l.trim()),
            })
        })
        .collect::<Result<_>>()?;
    let (&bias, weights) = values
        .split_first()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty fusion model", path.display())))?;
    Ok(FusionModel {
        weights: weights.to_vec(),
        bias,
    })
}

/// `FAR FRR` pairs, one per line.
pub fn write_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut text = String::new();
    for (far, frr) in points {
        let _ = writeln!(text, "{far:.9} {frr:.9}");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
