//! Training objectives and their analytic gradients.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Center-loss weight.
    pub cl_gamma: f64,
    /// Weight on each reconstruction term.
    pub rel_weight: f64,
    /// Hinge margin on cosine similarity.
    pub margin: f64,
    /// Cross-entropy weight for spoofed inputs in single-branch training.
    pub ce_pos_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            cl_gamma: 0.001,
            rel_weight: 50.0,
            margin: 0.5,
            ce_pos_weight: 1.0 / 9.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.cl_gamma < 0.0 || self.rel_weight < 0.0 || self.ce_pos_weight < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.margin) {
            return Err(Error::InvalidConfig(format!("margin must lie in [0, 1], got {}", self.margin)));
        }
        Ok(())
    }
}

fn clamp_prob<T: Real>(p: T) -> T {
    let lo = T::lit(PROB_CLAMP);
    p.max(lo).min(T::one() - lo)
}

fn class_weight<T: Real>(y: Label, pos_weight: T) -> T {
    match y {
        Label::Spoofed => pos_weight,
        Label::Genuine => T::one(),
    }
}

/// `-w(y) [y ln s + (1 - y) ln(1 - s)]` with spoofed as `y = 1`.
pub fn weighted_ce<T: Real>(score: T, y: Label, pos_weight: T) -> T {
    let s = clamp_prob(score);
    let w = class_weight(y, pos_weight);
    match y {
        Label::Spoofed => -w * s.ln(),
        Label::Genuine => -w * (T::one() - s).ln(),
    }
}

/// Derivative of [`weighted_ce`] with respect to the score (zero where clamped).
pub fn weighted_ce_grad<T: Real>(score: T, y: Label, pos_weight: T) -> T {
    if clamp_prob(score) != score {
        return T::zero();
    }
    let w = class_weight(y, pos_weight);
    match y {
        Label::Spoofed => -w / score,
        Label::Genuine => w / (T::one() - score),
    }
}

/// Derivative of [`weighted_ce`] with respect to the logit feeding the sigmoid.
pub fn weighted_ce_logit_grad<T: Real>(score: T, y: Label, pos_weight: T) -> T {
    if clamp_prob(score) != score {
        return T::zero();
    }
    class_weight(y, pos_weight) * (score - T::lit(y.target()))
}

fn norm<T: Real>(v: ArrayView1<'_, T>) -> T {
    v.dot(&v).sqrt()
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    a.dot(&b) / (na * nb)
}

fn pair_sign<T: Real>(y1: Label, y2: Label) -> T {
    if y1 == y2 {
        T::one()
    } else {
        -T::one()
    }
}

/// `max(0, m - l * cos(e1, e2))` with `l = +1` for same-label pairs and `-1` otherwise.
pub fn snn_hinge<T: Real>(e1: ArrayView1<'_, T>, e2: ArrayView1<'_, T>, y1: Label, y2: Label, margin: T) -> T {
    (margin - pair_sign::<T>(y1, y2) * cosine_similarity(e1, e2)).max(T::zero())
}

/// Gradients of [`snn_hinge`] with respect to `e1` and `e2`.
pub fn snn_hinge_grad<T: Real>(
    e1: ArrayView1<'_, T>,
    e2: ArrayView1<'_, T>,
    y1: Label,
    y2: Label,
    margin: T,
) -> (Array1<T>, Array1<T>) {
    let zeros = || Array1::zeros(e1.len());
    let (n1, n2) = (norm(e1), norm(e2));
    let l = pair_sign::<T>(y1, y2);
    if n1 == T::zero() || n2 == T::zero() {
        return (zeros(), zeros());
    }
    let cos = e1.dot(&e2) / (n1 * n2);
    if margin - l * cos <= T::zero() {
        return (zeros(), zeros());
    }
    // d cos / d e1 = e2 / (|e1||e2|) - cos e1 / |e1|^2
    let g1 = (&e2 / (n1 * n2) - &e1 * (cos / (n1 * n1))) * -l;
    let g2 = (&e1 / (n1 * n2) - &e2 * (cos / (n2 * n2))) * -l;
    (g1, g2)
}

/// Squared Frobenius norm of `x - x_hat`.
pub fn reconstruction_loss<T: Real>(x: &Array2<T>, x_hat: &Array2<T>) -> Result<T> {
    if x.dim() != x_hat.dim() {
        return Err(Error::InvalidInput(format!(
            "reconstruction shape {:?} does not match input {:?}",
            x_hat.dim(),
            x.dim()
        )));
    }
    Ok(Zip::from(x).and(x_hat).fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b)))
}

/// Gradient of [`reconstruction_loss`] with respect to `x_hat`.
pub fn reconstruction_loss_grad<T: Real>(x: &Array2<T>, x_hat: &Array2<T>) -> Array2<T> {
    (x_hat - x) * T::lit(2.0)
}

/// Per-class embedding centroids for center loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCentroids<T> {
    pub genuine: Array1<T>,
    pub spoofed: Array1<T>,
    pub update_rate: T,
}

impl<T: Real> ClassCentroids<T> {
    pub fn zeros(dim: usize, update_rate: T) -> Self {
        Self {
            genuine: Array1::zeros(dim),
            spoofed: Array1::zeros(dim),
            update_rate,
        }
    }

    pub fn get(&self, y: Label) -> &Array1<T> {
        match y {
            Label::Genuine => &self.genuine,
            Label::Spoofed => &self.spoofed,
        }
    }

    fn get_mut(&mut self, y: Label) -> &mut Array1<T> {
        match y {
            Label::Genuine => &mut self.genuine,
            Label::Spoofed => &mut self.spoofed,
        }
    }

    /// `c_y <- c_y - rate * mean_i(c_y - e_i)` over batch members of each class.
    pub fn update(&mut self, embeddings: &Array2<T>, labels: &[Label]) {
        for y in [Label::Genuine, Label::Spoofed] {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == y).collect();
            if rows.is_empty() {
                continue;
            }
            let rate = self.update_rate;
            let c = self.get_mut(y);
            let mut delta = Array1::zeros(c.len());
            for &i in &rows {
                delta += &(&*c - &embeddings.row(i));
            }
            delta /= T::from_usize_lossy(rows.len());
            *c -= &(delta * rate);
        }
    }
}

/// `½ ||e - c_y||²`.
pub fn center_loss<T: Real>(e: ArrayView1<'_, T>, y: Label, centroids: &ClassCentroids<T>) -> Result<T> {
    let c = centroids.get(y);
    if c.len() != e.len() {
        return Err(Error::InvalidInput(format!(
            "centroid dimension {} does not match embedding {}",
            c.len(),
            e.len()
        )));
    }
    Ok(Zip::from(&e).and(c).fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b)) * T::lit(0.5))
}

/// Gradient of [`center_loss`] with respect to the embedding (centroid held fixed).
pub fn center_loss_grad<T: Real>(e: ArrayView1<'_, T>, y: Label, centroids: &ClassCentroids<T>) -> Array1<T> {
    &e - centroids.get(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossMode {
    /// Weighted cross-entropy.
    Ce,
    /// Weighted cross-entropy plus `gamma` times center loss.
    Cl,
    /// Two cross-entropy branches plus the Siamese hinge, equally weighted.
    Snn,
    /// `Snn` plus weighted reconstruction loss on both branches.
    SnnRel,
}

impl LossMode {
    pub fn is_siamese(self) -> bool {
        matches!(self, LossMode::Snn | LossMode::SnnRel)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Ce => "ce",
            LossMode::Cl => "cl",
            LossMode::Snn => "snn",
            LossMode::SnnRel => "snn_rel",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" => Ok(LossMode::Ce),
            "cl" => Ok(LossMode::Cl),
            "snn" => Ok(LossMode::Snn),
            "snn_rel" | "snn-rel" => Ok(LossMode::SnnRel),
            other => Err(Error::InvalidConfig(format!("unknown loss mode `{other}`"))),
        }
    }
}

/// Individual loss terms; which ones are required depends on the mode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts<T> {
    pub ce1: Option<T>,
    pub ce2: Option<T>,
    pub center: Option<T>,
    pub hinge: Option<T>,
    pub rel1: Option<T>,
    pub rel2: Option<T>,
}

pub fn composite_loss<T: Real>(mode: LossMode, parts: &LossParts<T>, weights: &LossWeights) -> Result<T> {
    let need = |v: Option<T>, name: &str| {
        v.ok_or_else(|| Error::InvalidConfig(format!("{mode} loss requires the `{name}` term")))
    };
    let ce1 = need(parts.ce1, "ce1")?;
    Ok(match mode {
        LossMode::Ce => ce1,
        LossMode::Cl => ce1 + T::lit(weights.cl_gamma) * need(parts.center, "center")?,
        LossMode::Snn => ce1 + need(parts.ce2, "ce2")? + need(parts.hinge, "hinge")?,
        LossMode::SnnRel => {
            ce1 + need(parts.ce2, "ce2")?
                + need(parts.hinge, "hinge")?
                + T::lit(weights.rel_weight) * (need(parts.rel1, "rel1")? + need(parts.rel2, "rel2")?)
        }
    })
}
