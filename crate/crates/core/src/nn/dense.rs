use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis};
use rand::Rng;

use crate::scalar::Real;

use super::{Grads, ParamId, ParamStore};

/// Fully connected layer, `y = x W^T + b` over a `[N, in]` batch.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<T: Real>(ps: &mut ParamStore<T>, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: ps.he_normal(format!("{name}.weight"), &[outputs, inputs], inputs, rng),
            bias: ps.zeros(format!("{name}.bias"), &[outputs], true),
            inputs,
            outputs,
        }
    }

    pub fn num_params(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn forward<T: Real>(&self, ps: &ParamStore<T>, x: &Array2<T>) -> Array2<T> {
        let w = ps.mat(self.weight);
        let b = ps.get(self.bias);
        let mut y = Array2::zeros((x.nrows(), self.outputs));
        for mut row in y.axis_iter_mut(Axis(0)) {
            row.iter_mut().zip(b.iter()).for_each(|(r, &v)| *r = v);
        }
        general_mat_mul(T::one(), x, &w.t(), T::one(), &mut y);
        y
    }

    pub fn backward<T: Real>(&self, ps: &ParamStore<T>, grads: &mut Grads<T>, x: &Array2<T>, dy: &Array2<T>) -> Array2<T> {
        general_mat_mul(T::one(), &dy.t(), x, T::one(), &mut grads.mat_mut(self.weight));
        *grads.get_mut(self.bias) += &dy.sum_axis(Axis(0)).into_dyn();
        dy.dot(&ps.mat(self.weight))
    }
}
