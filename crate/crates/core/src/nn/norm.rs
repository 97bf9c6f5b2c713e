use ndarray::{Array1, Array4, Axis, Zip};

use crate::scalar::Real;

use super::{Grads, ParamId, ParamStore};

/// Per-channel batch normalization over `[N, C, H, W]`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
}

pub const BN_EPS: f64 = 1e-5;
/// Fraction of the running statistics kept at each training step.
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch statistics and normalized activations saved for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Array4<T>,
    pub mean: Array1<T>,
    pub var: Array1<T>,
    pub inv_std: Array1<T>,
}

impl BatchNorm2d {
    pub fn new<T: Real>(ps: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        Self {
            gamma: ps.filled(format!("{name}.gamma"), &[channels], T::one(), true),
            beta: ps.zeros(format!("{name}.beta"), &[channels], true),
            running_mean: ps.zeros(format!("{name}.running_mean"), &[channels], false),
            running_var: ps.filled(format!("{name}.running_var"), &[channels], T::one(), false),
            channels,
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.channels
    }

    fn affine<T: Real>(&self, ps: &ParamStore<T>, xhat: &Array4<T>) -> Array4<T> {
        let gamma = ps.get(self.gamma);
        let beta = ps.get(self.beta);
        let mut y = xhat.clone();
        for (c, mut ch) in y.axis_iter_mut(Axis(1)).enumerate() {
            let (g, b) = (gamma[c], beta[c]);
            ch.mapv_inplace(|v| g * v + b);
        }
        y
    }

    /// Normalizes with the batch's own statistics.
    pub fn forward_train<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>) -> (Array4<T>, BnCache<T>) {
        let (n, c, h, w) = x.dim();
        let count = T::from_usize_lossy(n * h * w);
        let eps = T::lit(BN_EPS);
        let mut mean = Array1::zeros(c);
        let mut var = Array1::zeros(c);
        for (ci, ch) in x.axis_iter(Axis(1)).enumerate() {
            let m = ch.sum() / count;
            let v = ch.fold(T::zero(), |acc, &v| acc + (v - m) * (v - m)) / count;
            mean[ci] = m;
            var[ci] = v;
        }
        let inv_std = var.mapv(|v: T| T::one() / (v + eps).sqrt());
        let mut xhat = x.clone();
        for (ci, mut ch) in xhat.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (mean[ci], inv_std[ci]);
            ch.mapv_inplace(|v| (v - m) * s);
        }
        let y = self.affine(ps, &xhat);
        (y, BnCache { xhat, mean, var, inv_std })
    }

    /// Normalizes with the running statistics.
    pub fn forward_eval<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>) -> Array4<T> {
        let eps = T::lit(BN_EPS);
        let rm = ps.get(self.running_mean);
        let rv = ps.get(self.running_var);
        let mut xhat = x.clone();
        for (ci, mut ch) in xhat.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (rm[ci], T::one() / (rv[ci] + eps).sqrt());
            ch.mapv_inplace(|v| (v - m) * s);
        }
        self.affine(ps, &xhat)
    }

    pub fn update_running<T: Real>(&self, ps: &mut ParamStore<T>, cache: &BnCache<T>) {
        let keep = T::lit(BN_MOMENTUM);
        let take = T::one() - keep;
        Zip::from(ps.get_mut(self.running_mean)).and(&cache.mean.view().into_dyn()).for_each(|r, &m| *r = keep * *r + take * m);
        Zip::from(ps.get_mut(self.running_var)).and(&cache.var.view().into_dyn()).for_each(|r, &v| *r = keep * *r + take * v);
    }

    pub fn backward<T: Real>(&self, ps: &ParamStore<T>, grads: &mut Grads<T>, cache: &BnCache<T>, dy: &Array4<T>) -> Array4<T> {
        let (n, _, h, w) = dy.dim();
        let count = T::from_usize_lossy(n * h * w);
        let gamma = ps.get(self.gamma);
        let mut dx = Array4::zeros(dy.raw_dim());
        for ci in 0..self.channels {
            let dyc = dy.index_axis(Axis(1), ci);
            let xh = cache.xhat.index_axis(Axis(1), ci);
            let sum_dy = dyc.sum();
            let sum_dy_xh = Zip::from(&dyc).and(&xh).fold(T::zero(), |acc, &a, &b| acc + a * b);
            grads.get_mut(self.gamma)[ci] += sum_dy_xh;
            grads.get_mut(self.beta)[ci] += sum_dy;
            let k = gamma[ci] * cache.inv_std[ci] / count;
            Zip::from(dx.index_axis_mut(Axis(1), ci))
                .and(&dyc)
                .and(&xh)
                .for_each(|d, &g, &x| *d = k * (count * g - sum_dy - x * sum_dy_xh));
        }
        dx
    }
}
