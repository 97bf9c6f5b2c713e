//! Minimal CPU layers with explicit backward passes.
//!
//! Parameters live in a flat [`ParamStore`]; layers hold [`ParamId`]s into it. A
//! backward pass accumulates into a [`Grads`] with the same layout, which the
//! optimizer and the checkpoint writer both walk in store order.

mod adam;
mod conv;
mod dense;
mod norm;

use ndarray::{ArrayD, ArrayView2, ArrayViewMut2, IxDyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

pub use adam::{Adam, AdamConfig};
pub use conv::{col2im, im2col, Conv2d, ConvGeom, ConvTranspose2d};
pub use dense::Dense;
pub use norm::{BatchNorm2d, BnCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub value: ArrayD<T>,
    /// Running statistics are stored alongside weights but are not optimized.
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    tensors: Vec<NamedTensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { tensors: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: ArrayD<T>, trainable: bool) -> ParamId {
        self.tensors.push(NamedTensor {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize], trainable: bool) -> ParamId {
        self.add(name, ArrayD::zeros(IxDyn(shape)), trainable)
    }

    pub fn filled(&mut self, name: impl Into<String>, shape: &[usize], v: T, trainable: bool) -> ParamId {
        self.add(name, ArrayD::from_elem(IxDyn(shape), v), trainable)
    }

    /// Normal(0, 2 / fan_in) initialization.
    pub fn he_normal(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> ParamId {
        let std = (2.0 / fan_in as f64).sqrt();
        let value = ArrayD::from_shape_simple_fn(IxDyn(shape), || {
            let g: f64 = rng.sample(StandardNormal);
            T::lit(g * std)
        });
        self.add(name, value, true)
    }

    pub fn get(&self, id: ParamId) -> &ArrayD<T> {
        &self.tensors[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ArrayD<T> {
        &mut self.tensors[id.0].value
    }

    /// The tensor viewed as `shape[0] × (product of the rest)`.
    pub fn mat(&self, id: ParamId) -> ArrayView2<'_, T> {
        as_matrix(&self.tensors[id.0].value)
    }

    pub fn tensors(&self) -> &[NamedTensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [NamedTensor<T>] {
        &mut self.tensors
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    pub fn num_trainable(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(|t| t.value.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<T> {
        Grads(self.tensors.iter().map(|t| ArrayD::zeros(t.value.raw_dim())).collect())
    }

    /// Sum of squares of trainable entries.
    pub fn trainable_sq_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .flat_map(|t| t.value.iter())
            .map(|v| v.as_f64().powi(2))
            .sum()
    }
}

pub(crate) fn as_matrix<T: Real>(a: &ArrayD<T>) -> ArrayView2<'_, T> {
    let rows = a.shape()[0];
    let cols = a.len() / rows.max(1);
    a.view().into_shape_with_order((rows, cols)).expect("parameters are contiguous")
}

/// Gradient accumulator laid out like a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T>(pub Vec<ArrayD<T>>);

impl<T: Real> Grads<T> {
    pub fn get(&self, id: ParamId) -> &ArrayD<T> {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ArrayD<T> {
        &mut self.0[id.0]
    }

    pub fn mat_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, T> {
        let a = &mut self.0[id.0];
        let rows = a.shape()[0];
        let cols = a.len() / rows.max(1);
        a.view_mut().into_shape_with_order((rows, cols)).expect("gradients are contiguous")
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}
