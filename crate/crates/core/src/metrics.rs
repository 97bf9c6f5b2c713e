//! Equal error rate and logistic-regression score fusion.
//!
//! Spoofed is the positive class. At threshold `t` a trial is called spoofed when
//! its score exceeds `t`; the false-acceptance rate is the fraction of genuine
//! trials above `t` and the false-rejection rate the fraction of spoofed trials
//! at or below it.

use std::collections::HashMap;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    pub utt_id: String,
    /// Higher means more likely spoofed.
    pub score: f64,
}

impl TrialScore {
    pub fn new(utt_id: impl Into<String>, score: f64) -> Self {
        Self {
            utt_id: utt_id.into(),
            score,
        }
    }
}

/// `(FAR, FRR)` at `-inf` and at every distinct score, in increasing threshold order.
pub fn det_points<T: Real>(genuine: &[T], spoofed: &[T]) -> Vec<(T, T)> {
    let mut all: Vec<(T, bool)> = genuine
        .iter()
        .map(|&s| (s, false))
        .chain(spoofed.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let ng = T::from_usize_lossy(genuine.len());
    let ns = T::from_usize_lossy(spoofed.len());
    let (mut g_below, mut s_below) = (0usize, 0usize);
    let mut points = vec![(T::one(), T::zero())];
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                s_below += 1;
            } else {
                g_below += 1;
            }
            i += 1;
        }
        let far = T::from_usize_lossy(genuine.len() - g_below) / ng;
        let frr = T::from_usize_lossy(s_below) / ns;
        points.push((far, frr));
    }
    points
}

/// Where the piecewise-linear DET trace crosses FAR == FRR.
pub fn eer_from_points<T: Real>(points: &[(T, T)]) -> T {
    for w in points.windows(2) {
        let (a0, r0) = w[0];
        let (a1, r1) = w[1];
        if r1 >= a1 {
            let d0 = a0 - r0;
            let d1 = a1 - r1;
            let lambda = if d0 - d1 == T::zero() { T::zero() } else { d0 / (d0 - d1) };
            return a0 + lambda * (a1 - a0);
        }
    }
    // the last point always has FAR = 0, FRR = 1
    T::zero()
}

/// EER from raw per-class scores.
pub fn eer<T: Real>(genuine: &[T], spoofed: &[T]) -> Result<T> {
    if genuine.is_empty() || spoofed.is_empty() {
        return Err(Error::InvalidInput("EER needs at least one trial of each class".into()));
    }
    if genuine.iter().chain(spoofed).any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    Ok(eer_from_points(&det_points(genuine, spoofed)))
}

/// Splits scores by label. Fails on the first unlabeled utterance.
pub fn split_by_label(scores: &[TrialScore], labels: &HashMap<String, Label>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut g, mut s) = (Vec::new(), Vec::new());
    for t in scores {
        match labels.get(&t.utt_id) {
            Some(Label::Genuine) => g.push(t.score),
            Some(Label::Spoofed) => s.push(t.score),
            None => return Err(Error::InvalidInput(format!("no label for utterance `{}`", t.utt_id))),
        }
    }
    Ok((g, s))
}

/// EER as a fraction in [0, 1].
pub fn compute_eer(scores: &[TrialScore], labels: &HashMap<String, Label>) -> Result<f64> {
    let (g, s) = split_by_label(scores, labels)?;
    eer(&g, &s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Full-batch gradient ascent settings for [`fit_fusion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub max_iter: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-9,
        }
    }
}

/// Sorts every subsystem by utterance id and checks that all list the same ids.
/// Returns the ids and a `[trial][subsystem]` score matrix.
fn align(systems: &[Vec<TrialScore>]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let first = systems.first().ok_or_else(|| Error::InvalidInput("no subsystems".into()))?;
    let sorted: Vec<Vec<&TrialScore>> = systems
        .iter()
        .map(|sys| {
            let mut v: Vec<&TrialScore> = sys.iter().collect();
            v.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
            v
        })
        .collect();
    let ids: Vec<String> = sorted[0].iter().map(|t| t.utt_id.clone()).collect();
    for (k, sys) in sorted.iter().enumerate() {
        if sys.len() != first.len() {
            return Err(Error::InvalidInput(format!(
                "subsystem {k} has {} trials, subsystem 0 has {}",
                sys.len(),
                first.len()
            )));
        }
        if let Some((a, b)) = sys.iter().zip(&ids).find(|(a, b)| &a.utt_id != *b) {
            return Err(Error::InvalidInput(format!(
                "subsystem {k} lists `{}` where subsystem 0 lists `{b}`",
                a.utt_id
            )));
        }
    }
    let rows = (0..ids.len()).map(|i| sorted.iter().map(|sys| sys[i].score).collect()).collect();
    Ok((ids, rows))
}

/// Fits unregularized logistic regression of the spoofed label on the stacked
/// subsystem scores by full-batch gradient ascent on the mean log-likelihood.
pub fn fit_fusion(dev: &[Vec<TrialScore>], labels: &HashMap<String, Label>, cfg: &FusionConfig) -> Result<FusionModel> {
    if dev.len() < 2 {
        return Err(Error::InvalidInput("fusion needs at least two subsystems".into()));
    }
    let (ids, rows) = align(dev)?;
    let targets: Vec<f64> = ids
        .iter()
        .map(|id| {
            labels
                .get(id)
                .map(|l| l.target())
                .ok_or_else(|| Error::InvalidInput(format!("no label for utterance `{id}`")))
        })
        .collect::<Result<_>>()?;
    if targets.iter().all(|&t| t == 0.0) || targets.iter().all(|&t| t == 1.0) {
        return Err(Error::InvalidInput("fusion needs dev trials of both classes".into()));
    }
    if rows.iter().flatten().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }

    let k = dev.len();
    let n = rows.len() as f64;
    // Lipschitz bound of the mean log-likelihood gradient: 0.25 * mean ||[s, 1]||^2
    let lip = 0.25 * rows.iter().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n;
    let step = 1.0 / lip;
    let mut w = vec![0.0; k];
    let mut b = 0.0;
    for _ in 0..cfg.max_iter {
        let mut gw = vec![0.0; k];
        let mut gb = 0.0;
        for (r, &y) in rows.iter().zip(&targets) {
            let z = b + r.iter().zip(&w).map(|(s, w)| s * w).sum::<f64>();
            let e = y - sigmoid(z);
            gb += e;
            gw.iter_mut().zip(r).for_each(|(g, s)| *g += e * s);
        }
        gb /= n;
        gw.iter_mut().for_each(|g| *g /= n);
        let gnorm = (gb * gb + gw.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if gnorm < cfg.tol {
            break;
        }
        b += step * gb;
        w.iter_mut().zip(&gw).for_each(|(w, g)| *w += step * g);
    }
    Ok(FusionModel { weights: w, bias: b })
}

/// `sigmoid(w . s + b)` per utterance, in utterance-id order.
pub fn apply_fusion(model: &FusionModel, systems: &[Vec<TrialScore>]) -> Result<Vec<TrialScore>> {
    if systems.len() != model.weights.len() {
        return Err(Error::InvalidInput(format!(
            "fusion model has {} weights but {} subsystems were given",
            model.weights.len(),
            systems.len()
        )));
    }
    let (ids, rows) = align(systems)?;
    Ok(ids
        .into_iter()
        .zip(rows)
        .map(|(id, r)| {
            let z = model.bias + r.iter().zip(&model.weights).map(|(s, w)| s * w).sum::<f64>();
            TrialScore::new(id, sigmoid(z))
        })
        .collect())
}
