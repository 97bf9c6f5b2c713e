use std::collections::HashMap;
use std::fmt;

use crate::dataset::{Label, UtteranceRecord};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::metrics::{compute_eer, TrialScore};
use crate::model::{Model, ModelSpec};
use crate::scalar::Real;

use super::{early_stop_check, score_records, FeatureSource, StopDecision, TrainConfig, TrainState, Trainer};

#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub train: &'a [UtteranceRecord],
    pub dev: &'a [UtteranceRecord],
    pub eval: Option<&'a [UtteranceRecord]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Fraction in `[0, 1]`.
    pub dev_eer: f64,
    pub epochs_since_best: usize,
    pub train_eer: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.6} {:.6} {}",
            self.epoch, self.train_loss, self.dev_eer, self.epochs_since_best
        )?;
        if let Some(e) = self.train_eer {
            write!(f, " {e:.6}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    /// Model from the epoch with the lowest dev EER.
    pub best_model: Model<T>,
    pub best_epoch: usize,
    pub best_dev_eer: f64,
    pub dev_scores: Vec<TrialScore>,
    pub eval_scores: Option<Vec<TrialScore>>,
    pub history: Vec<EpochLog>,
}

fn label_map(records: &[UtteranceRecord]) -> HashMap<String, Label> {
    records.iter().map(|r| (r.utt_id.clone(), r.label)).collect()
}

/// Trains from a fresh initialization until dev EER stops improving, then scores
/// dev and eval with the best model. `on_epoch` sees each log entry as it is produced.
pub fn run_experiment<T: Real>(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    weights: &LossWeights,
    data: ExperimentData<'_>,
    source: &dyn FeatureSource<T>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<ExperimentOutcome<T>> {
    let model = Model::new(spec.clone(), cfg.seed)?;
    let mut trainer = Trainer::new(model, cfg.clone(), *weights, data.train)?;
    let dev_labels = label_map(data.dev);
    let train_labels = label_map(data.train);

    let mut state = TrainState::default();
    let mut best: Option<(Model<T>, Vec<TrialScore>, usize)> = None;
    let mut history = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let train_loss = trainer.train_epoch(epoch as u64, data.train, source)?;
        let dev_scores = score_records(&trainer.model, data.dev, source, cfg.eval_batch_size)?;
        let dev_eer = compute_eer(&dev_scores, &dev_labels)?;
        let train_eer = if cfg.track_train_eer {
            let s = score_records(&trainer.model, data.train, source, cfg.eval_batch_size)?;
            Some(compute_eer(&s, &train_labels)?)
        } else {
            None
        };
        let decision = early_stop_check(&mut state, dev_eer, cfg.patience);
        let log = EpochLog {
            epoch: state.epoch,
            train_loss,
            dev_eer,
            epochs_since_best: state.epochs_since_best,
            train_eer,
        };
        on_epoch(&log);
        history.push(log);
        match decision {
            StopDecision::Continue { improved: true } => {
                best = Some((trainer.model.clone(), dev_scores, state.epoch));
            }
            StopDecision::Continue { improved: false } => {}
            StopDecision::Stop => break,
        }
    }

    // only a NaN dev EER can leave this unset
    let (best_model, dev_scores, best_epoch) = best.ok_or(Error::TrainingDiverged { step: trainer.step() })?;
    let eval_scores = match data.eval {
        Some(recs) => Some(score_records(&best_model, recs, source, cfg.eval_batch_size)?),
        None => None,
    };
    Ok(ExperimentOutcome {
        best_model,
        best_epoch,
        best_dev_eer: state.best_dev_eer,
        dev_scores,
        eval_scores,
        history,
    })
}
