//! Corpus records, manifest parsing, the synthetic toy corpus and the Siamese pair sampler.

mod manifest;
mod sampler;
mod toy;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use manifest::{parse_manifest, parse_manifest_str, write_manifest};
pub use sampler::{create_snn_dataset, PairRef, SamplerConfig, SnnSampler};
pub use toy::{make_toy_corpus, replay_channel, synth_genuine, synth_toy_utterance, ToyCorpusConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Genuine,
    Spoofed,
}

impl Label {
    /// Binary target with spoofed as the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Genuine => 0.0,
            Label::Spoofed => 1.0,
        }
    }

    /// Protocol key token.
    pub fn key(self) -> &'static str {
        match self {
            Label::Genuine => "bonafide",
            Label::Spoofed => "spoof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    Train,
    Dev,
    Eval,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Dev => "dev",
            Subset::Eval => "eval",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Subset::Train),
            "dev" => Ok(Subset::Dev),
            "eval" => Ok(Subset::Eval),
            other => Err(Error::InvalidConfig(format!("unknown subset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub label: Label,
    pub subset: Subset,
    /// Audio file name relative to the corpus audio directory.
    pub audio_path: String,
}
