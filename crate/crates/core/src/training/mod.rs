//! Optimization loop: Adam, pair-sampled Siamese epochs or plain utterance epochs,
//! dev-EER early stopping and experiment orchestration.

mod config;
mod data;
mod experiment;
mod trainer;

pub use config::ExperimentConfig;
pub use data::{cache_path, resolve_audio_path, DiskFeatures, FeatureSource, InMemoryFeatures};
pub use experiment::{run_experiment, EpochLog, ExperimentData, ExperimentOutcome};
pub use trainer::{score_records, BatchObjective, Trainer};

pub use crate::losses::LossMode;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::AdamConfig;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: LossMode,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Decoupled weight decay coefficient.
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Epochs without strict dev-EER improvement before stopping.
    pub patience: usize,
    /// Pairs per Siamese epoch.
    pub num_samples: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub center_update_rate: f64,
    /// Also score the training set after each epoch.
    pub track_train_eer: bool,
    /// Batch size for inference-mode scoring.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_mode(LossMode::Snn)
    }
}

impl TrainConfig {
    /// Full-scale defaults; decoder runs use half the batch and half the pairs.
    pub fn for_mode(mode: LossMode) -> Self {
        let decoder = mode == LossMode::SnnRel;
        Self {
            mode,
            lr: 3.95e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-4,
            batch_size: if decoder { 16 } else { 32 },
            patience: 15,
            num_samples: if decoder { 500_000 } else { 1_000_000 },
            max_epochs: 200,
            seed: 0,
            center_update_rate: 0.5,
            track_train_eer: false,
            eval_batch_size: 16,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.batch_size == 0 || (self.mode.is_siamese() && self.batch_size < 2) {
            return bad("batch_size must be >= 1, and >= 2 in Siamese modes");
        }
        if self.num_samples == 0 || self.max_epochs == 0 || self.eval_batch_size == 0 {
            return bad("num_samples, max_epochs and eval_batch_size must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub best_dev_eer: f64,
    pub epochs_since_best: usize,
}

impl Default for TrainState {
    fn default() -> Self {
        Self {
            epoch: 0,
            best_dev_eer: f64::INFINITY,
            epochs_since_best: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// Keep training; `improved` marks a new best dev EER.
    Continue { improved: bool },
    Stop,
}

/// Records one epoch's dev EER. Only a strict improvement resets the counter;
/// training stops once `patience` consecutive epochs fail to improve.
pub fn early_stop_check(state: &mut TrainState, dev_eer: f64, patience: usize) -> StopDecision {
    state.epoch += 1;
    if dev_eer < state.best_dev_eer {
        state.best_dev_eer = dev_eer;
        state.epochs_since_best = 0;
        return StopDecision::Continue { improved: true };
    }
    state.epochs_since_best += 1;
    if state.epochs_since_best >= patience {
        StopDecision::Stop
    } else {
        StopDecision::Continue { improved: false }
    }
}

/// Prior-correcting output bias for weighted single-branch training: `ln(1 / pos_weight)`,
/// which is `ln 9` at the default spoofed weight of 1/9. Zero for Siamese modes and
/// unweighted runs.
pub fn init_output_bias<T: Real>(model: &mut Model<T>, mode: LossMode, ce_pos_weight: f64) {
    let weighted = matches!(mode, LossMode::Ce | LossMode::Cl) && ce_pos_weight > 0.0 && ce_pos_weight != 1.0;
    let bias = if weighted { (1.0 / ce_pos_weight).ln() } else { 0.0 };
    model.set_output_bias(T::lit(bias));
}
