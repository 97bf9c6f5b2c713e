use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Label, UtteranceRecord};

const SHUFFLE_STREAM: u64 = 1;
const CLASS_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Pairs per epoch.
    pub num_samples: usize,
    pub seed: u64,
}

/// One Siamese training pair, as indices into the record list it was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRef {
    pub first: usize,
    pub first_label: Label,
    pub second: usize,
    pub second_label: Label,
}

/// Balanced pair sampler.
///
/// Records are split by label into two lists. Each pair element picks a class with
/// probability 1/2 and takes the next entry of that class's list through a
/// wrap-around counter, so a record is never reused before its whole class has
/// been visited, and the minority class is upsampled to parity.
#[derive(Debug, Clone)]
pub struct SnnSampler {
    cfg: SamplerConfig,
    genuine: Vec<usize>,
    spoofed: Vec<usize>,
    genuine_next: usize,
    spoofed_next: usize,
    class_rng: ChaCha8Rng,
    epoch: u64,
}

fn rng_for(seed: u64, epoch: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

impl SnnSampler {
    pub fn new(records: &[UtteranceRecord], cfg: SamplerConfig) -> Result<Self> {
        if cfg.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be >= 1".into()));
        }
        let by = |l: Label| -> Vec<usize> {
            records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.label == l)
                .map(|(i, _)| i)
                .collect()
        };
        let genuine = by(Label::Genuine);
        let spoofed = by(Label::Spoofed);
        if genuine.is_empty() || spoofed.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "pair sampling needs both classes, found {} genuine and {} spoofed",
                genuine.len(),
                spoofed.len()
            )));
        }
        let mut s = Self {
            cfg,
            genuine,
            spoofed,
            genuine_next: 0,
            spoofed_next: 0,
            class_rng: rng_for(cfg.seed, 0, CLASS_STREAM),
            epoch: 0,
        };
        s.epoch_reshuffle(0);
        Ok(s)
    }

    /// Re-permutes both class lists for `epoch` and resets the counters. The
    /// permutation depends only on `(seed, epoch)`, not on earlier draws.
    pub fn epoch_reshuffle(&mut self, epoch: u64) {
        self.genuine.sort_unstable();
        self.spoofed.sort_unstable();
        let mut rng = rng_for(self.cfg.seed, epoch, SHUFFLE_STREAM);
        self.genuine.shuffle(&mut rng);
        self.spoofed.shuffle(&mut rng);
        self.genuine_next = 0;
        self.spoofed_next = 0;
        self.class_rng = rng_for(self.cfg.seed, epoch, CLASS_STREAM);
        self.epoch = epoch;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn genuine_order(&self) -> &[usize] {
        &self.genuine
    }

    pub fn spoofed_order(&self) -> &[usize] {
        &self.spoofed
    }

    fn draw(&mut self) -> (usize, Label) {
        if self.class_rng.random_bool(0.5) {
            let idx = self.spoofed[self.spoofed_next];
            self.spoofed_next = (self.spoofed_next + 1) % self.spoofed.len();
            (idx, Label::Spoofed)
        } else {
            let idx = self.genuine[self.genuine_next];
            self.genuine_next = (self.genuine_next + 1) % self.genuine.len();
            (idx, Label::Genuine)
        }
    }

    /// Draws `num_samples` pairs from the current epoch's permutation.
    pub fn create_snn_dataset(&mut self) -> Vec<PairRef> {
        (0..self.cfg.num_samples)
            .map(|_| {
                let (first, first_label) = self.draw();
                let (second, second_label) = self.draw();
                PairRef {
                    first,
                    first_label,
                    second,
                    second_label,
                }
            })
            .collect()
    }
}

/// One epoch's pair set for epoch 0 of a fresh sampler.
pub fn create_snn_dataset(records: &[UtteranceRecord], cfg: SamplerConfig) -> Result<Vec<PairRef>> {
    Ok(SnnSampler::new(records, cfg)?.create_snn_dataset())
}
