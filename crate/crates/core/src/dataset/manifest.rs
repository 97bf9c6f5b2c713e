use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Label, Subset, UtteranceRecord};

/// Parses a CM protocol file: whitespace-separated columns, utterance id in the
/// second column (or the first, for two-column files) and the key in the last.
pub fn parse_manifest(path: &Path, subset: Subset) -> Result<Vec<UtteranceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_str(&text, subset, &path.display().to_string())
}

pub fn parse_manifest_str(text: &str, subset: Subset, origin: &str) -> Result<Vec<UtteranceRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg,
        };
        if cols.len() < 2 {
            return Err(err(format!("expected at least 2 columns, found {}", cols.len())));
        }
        let key = cols[cols.len() - 1];
        let label = match key {
            "bonafide" => Label::Genuine,
            "spoof" => Label::Spoofed,
            other => return Err(err(format!("unknown key `{other}`, expected bonafide or spoof"))),
        };
        let utt_id = if cols.len() == 2 { cols[0] } else { cols[1] };
        if !seen.insert(utt_id.to_string()) {
            return Err(err(format!("duplicate utterance id `{utt_id}`")));
        }
        out.push(UtteranceRecord {
            utt_id: utt_id.to_string(),
            label,
            subset,
            audio_path: format!("{utt_id}.flac"),
        });
    }
    Ok(out)
}

/// Writes records in the five-column protocol layout.
pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let mut text = String::new();
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(text, "TOY_{:04} {} - - {}", i % 10, r.utt_id, r.label.key());
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
