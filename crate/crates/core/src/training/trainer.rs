use ndarray::{Array1, Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, SamplerConfig, SnnSampler, UtteranceRecord};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::losses::{
    center_loss, center_loss_grad, composite_loss, reconstruction_loss, reconstruction_loss_grad, snn_hinge,
    snn_hinge_grad, weighted_ce, weighted_ce_logit_grad, ClassCentroids, LossMode, LossParts, LossWeights,
};
use crate::metrics::TrialScore;
use crate::model::{sigmoid, stack_features, ForwardOutput, Model, OutputGrads, Tape};
use crate::nn::{Adam, Grads};
use crate::scalar::Real;

use super::{init_output_bias, FeatureSource, TrainConfig};

const UTTERANCE_STREAM: u64 = 3;

/// Result of [`Trainer::batch_objective`].
#[derive(Debug, Clone)]
pub struct BatchObjective<T> {
    pub loss: T,
    pub grads: Grads<T>,
    pub out: ForwardOutput<T>,
    pub tape: Tape<T>,
}

/// Model plus optimizer state and the mode-specific extras (centroids, pair sampler).
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub cfg: TrainConfig,
    pub weights: LossWeights,
    optimizer: Adam<T>,
    centroids: Option<ClassCentroids<T>>,
    sampler: Option<SnnSampler>,
    step: usize,
}

impl<T: Real> Trainer<T> {
    /// Prepares `model` for training on `train`. Sets the output bias for the mode.
    pub fn new(mut model: Model<T>, cfg: TrainConfig, weights: LossWeights, train: &[UtteranceRecord]) -> Result<Self> {
        cfg.validate()?;
        weights.validate()?;
        if cfg.mode == LossMode::SnnRel && !model.spec.with_decoder {
            return Err(Error::InvalidConfig("snn_rel needs a model with a decoder".into()));
        }
        if train.is_empty() {
            return Err(Error::InvalidDataset("empty training set".into()));
        }
        init_output_bias(&mut model, cfg.mode, weights.ce_pos_weight);
        let optimizer = Adam::new(cfg.adam(), &model.params);
        let centroids = (cfg.mode == LossMode::Cl)
            .then(|| ClassCentroids::zeros(model.spec.embedding_dim(), T::lit(cfg.center_update_rate)));
        let sampler = if cfg.mode.is_siamese() {
            Some(SnnSampler::new(
                train,
                SamplerConfig {
                    num_samples: cfg.num_samples,
                    seed: cfg.seed,
                },
            )?)
        } else {
            None
        };
        Ok(Self {
            model,
            cfg,
            weights,
            optimizer,
            centroids,
            sampler,
            step: 0,
        })
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn centroids(&self) -> Option<&ClassCentroids<T>> {
        self.centroids.as_ref()
    }

    /// One pass over the training data; returns the mean batch loss.
    ///
    /// `train` must be the record list the trainer was built with.
    pub fn train_epoch(&mut self, epoch: u64, train: &[UtteranceRecord], source: &dyn FeatureSource<T>) -> Result<f64> {
        let batches: Vec<Vec<(usize, Label)>> = match self.sampler.as_mut() {
            Some(sampler) => {
                sampler.epoch_reshuffle(epoch);
                let pairs = sampler.create_snn_dataset();
                pairs
                    .chunks(self.cfg.batch_size)
                    .map(|chunk| {
                        // first branch in the top half of the batch, second branch below
                        let a = chunk.iter().map(|p| (p.first, p.first_label));
                        let b = chunk.iter().map(|p| (p.second, p.second_label));
                        a.chain(b).collect()
                    })
                    .collect()
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                rng.set_stream(UTTERANCE_STREAM);
                let mut order: Vec<usize> = (0..train.len()).collect();
                order.shuffle(&mut rng);
                order
                    .chunks(self.cfg.batch_size)
                    .map(|c| c.iter().map(|&i| (i, train[i].label)).collect())
                    .collect()
            }
        };
        let mut total = 0.0;
        for batch in &batches {
            let feats = batch
                .iter()
                .map(|&(i, _)| {
                    let r = train
                        .get(i)
                        .ok_or_else(|| Error::InvalidDataset(format!("record index {i} out of range")))?;
                    let f = source.load(r)?;
                    self.model.check_input(&f)?;
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<Label> = batch.iter().map(|&(_, l)| l).collect();
            total += self.train_batch(&feats, &labels)?;
        }
        Ok(total / batches.len() as f64)
    }

    /// Training-mode loss and parameter gradients on a batch, without stepping.
    /// In Siamese modes the batch holds the first branch of every pair followed by
    /// the second branch in the same order.
    pub fn batch_objective(&self, feats: &[FeatureMatrix<T>], labels: &[Label]) -> Result<BatchObjective<T>> {
        if feats.len() != labels.len() {
            return Err(Error::InvalidInput("feature and label counts differ".into()));
        }
        let refs: Vec<&FeatureMatrix<T>> = feats.iter().collect();
        let x = stack_features(&refs)?;
        let (out, tape) = self.model.forward(&x, true);
        let (loss, og) = self.loss_and_grads(&x.index_axis(Axis(1), 0).to_owned(), &out, labels)?;
        let grads = self.model.backward(&out, &tape, &og);
        Ok(BatchObjective {
            loss,
            grads,
            out,
            tape,
        })
    }

    /// One optimizer step on a batch; returns the batch loss.
    pub fn train_batch(&mut self, feats: &[FeatureMatrix<T>], labels: &[Label]) -> Result<f64> {
        let obj = self.batch_objective(feats, labels)?;
        self.step += 1;
        let loss = obj.loss.as_f64();
        if !loss.is_finite() || !obj.grads.is_finite() {
            return Err(Error::TrainingDiverged { step: self.step });
        }
        self.optimizer.update(&mut self.model.params, &obj.grads);
        self.model.commit_batch_stats(&obj.tape);
        if let Some(c) = self.centroids.as_mut() {
            c.update(&obj.out.embeddings, labels);
        }
        Ok(loss)
    }

    fn loss_and_grads(
        &self,
        x: &Array3<T>,
        out: &ForwardOutput<T>,
        labels: &[Label],
    ) -> Result<(T, OutputGrads<T>)> {
        let n = labels.len();
        let w = &self.weights;
        let emb = &out.embeddings;
        let mut dlogits = Array1::zeros(n);
        let mut parts = LossParts::default();
        let mut demb: Option<Array2<T>> = None;
        let mut drec: Option<Array3<T>> = None;

        let mut ce_mean = |range: std::ops::Range<usize>, pos_weight: T| {
            let b = T::from_usize_lossy(range.len());
            let mut sum = T::zero();
            for i in range {
                sum += weighted_ce(out.scores[i], labels[i], pos_weight);
                dlogits[i] = weighted_ce_logit_grad(out.scores[i], labels[i], pos_weight) / b;
            }
            sum / b
        };

        if !self.cfg.mode.is_siamese() {
            parts.ce1 = Some(ce_mean(0..n, T::lit(w.ce_pos_weight)));
            if let Some(c) = &self.centroids {
                let b = T::from_usize_lossy(n);
                let gamma = T::lit(w.cl_gamma);
                let mut g = Array2::zeros(emb.dim());
                let mut sum = T::zero();
                for i in 0..n {
                    sum += center_loss(emb.row(i), labels[i], c)?;
                    g.row_mut(i).assign(&(center_loss_grad(emb.row(i), labels[i], c) * (gamma / b)));
                }
                parts.center = Some(sum / b);
                demb = Some(g);
            }
        } else {
            if n % 2 != 0 {
                return Err(Error::InvalidInput("Siamese batch must hold both branches".into()));
            }
            let half = n / 2;
            let bh = T::from_usize_lossy(half);
            parts.ce1 = Some(ce_mean(0..half, T::one()));
            parts.ce2 = Some(ce_mean(half..n, T::one()));

            let margin = T::lit(w.margin);
            let mut g = Array2::zeros(emb.dim());
            let mut sum = T::zero();
            for i in 0..half {
                let j = half + i;
                let (e1, e2) = (emb.row(i), emb.row(j));
                sum += snn_hinge(e1, e2, labels[i], labels[j], margin);
                let (g1, g2) = snn_hinge_grad(e1, e2, labels[i], labels[j], margin);
                g.row_mut(i).assign(&(g1 / bh));
                g.row_mut(j).assign(&(g2 / bh));
            }
            parts.hinge = Some(sum / bh);
            demb = Some(g);

            if self.cfg.mode == LossMode::SnnRel {
                let rec = out
                    .reconstruction
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("snn_rel needs a model with a decoder".into()))?;
                let scale = T::lit(w.rel_weight) / bh;
                let mut g = Array3::zeros(rec.dim());
                let (mut r1, mut r2) = (T::zero(), T::zero());
                for i in 0..n {
                    let xi = x.index_axis(Axis(0), i).to_owned();
                    let ri = rec.index_axis(Axis(0), i).to_owned();
                    let l = reconstruction_loss(&xi, &ri)?;
                    if i < half {
                        r1 += l;
                    } else {
                        r2 += l;
                    }
                    g.index_axis_mut(Axis(0), i)
                        .assign(&(reconstruction_loss_grad(&xi, &ri) * scale));
                }
                parts.rel1 = Some(r1 / bh);
                parts.rel2 = Some(r2 / bh);
                drec = Some(g);
            }
        }
        let loss = composite_loss(self.cfg.mode, &parts, w)?;
        Ok((
            loss,
            OutputGrads {
                logits: dlogits,
                embeddings: demb,
                reconstruction: drec,
            },
        ))
    }
}

/// Inference-mode spoofed-class probabilities, computed in `f64` from the logits.
pub fn score_records<T: Real>(
    model: &Model<T>,
    records: &[UtteranceRecord],
    source: &dyn FeatureSource<T>,
    batch_size: usize,
) -> Result<Vec<TrialScore>> {
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(batch_size.max(1)) {
        let feats = chunk.iter().map(|r| source.load(r)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FeatureMatrix<T>> = feats.iter().collect();
        let logits = model.logits(&refs)?;
        for (r, z) in chunk.iter().zip(logits) {
            out.push(TrialScore::new(r.utt_id.clone(), sigmoid(z.as_f64())));
        }
    }
    Ok(out)
}
