use ndarray::{ArrayD, Zip};

use crate::scalar::Real;

use super::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay: parameters shrink by `lr * weight_decay * p` each step.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3.95e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias-corrected moments and decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub step: u64,
    first: Vec<ArrayD<T>>,
    second: Vec<ArrayD<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, ps: &ParamStore<T>) -> Self {
        let zeros = || ps.tensors().iter().map(|t| ArrayD::zeros(t.value.raw_dim())).collect();
        Self {
            cfg,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn update(&mut self, ps: &mut ParamStore<T>, grads: &Grads<T>) {
        self.step += 1;
        let c = self.cfg;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        let decay = T::lit(c.lr * c.weight_decay);
        let corr1 = T::one() - T::lit(c.beta1.powi(self.step as i32));
        let corr2 = T::one() - T::lit(c.beta2.powi(self.step as i32));
        for (i, t) in ps.tensors_mut().iter_mut().enumerate() {
            if !t.trainable {
                continue;
            }
            Zip::from(&mut t.value)
                .and(&grads.0[i])
                .and(&mut self.first[i])
                .and(&mut self.second[i])
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    let mhat = *m / corr1;
                    let vhat = *v / corr2;
                    *p = *p - lr * mhat / (vhat.sqrt() + eps) - decay * *p;
                });
        }
    }
}
