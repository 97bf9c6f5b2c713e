use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array4, ArrayView3, ArrayViewMut3, Axis};
use rand::Rng;

use crate::scalar::Real;

use super::{Grads, ParamId, ParamStore};

/// Geometry of a 2-D convolution over one `[channels, height, width]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: (usize, usize),
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride.0 + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride.1 + 1
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// Unfolds receptive fields into columns: `[C*k*k, Ho*Wo]`.
pub fn im2col<T: Real>(x: ArrayView3<'_, T>, g: &ConvGeom, cols: &mut Array2<T>) {
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let (ho, wo) = (g.out_height(), g.out_width());
    let (h, w, k) = (g.height as isize, g.width as isize, g.kernel);
    let out = cols.as_slice_mut().expect("standard layout");
    for c in 0..g.channels {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut out[row * ho * wo..(row + 1) * ho * wo];
                for oh in 0..ho {
                    let ih = (oh * g.stride.0 + ki) as isize - g.pad as isize;
                    let line = &mut dst[oh * wo..(oh + 1) * wo];
                    if ih < 0 || ih >= h {
                        line.fill(T::zero());
                        continue;
                    }
                    let base = (c as isize * h + ih) * w;
                    for (ow, v) in line.iter_mut().enumerate() {
                        let iw = (ow * g.stride.1 + kj) as isize - g.pad as isize;
                        *v = if iw < 0 || iw >= w { T::zero() } else { xs[(base + iw) as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `x`.
pub fn col2im<T: Real>(cols: &Array2<T>, g: &ConvGeom, x: &mut ArrayViewMut3<'_, T>) {
    let (ho, wo) = (g.out_height(), g.out_width());
    let (h, w, k) = (g.height as isize, g.width as isize, g.kernel);
    let src = cols.as_slice().expect("standard layout");
    let xs = x.as_slice_mut().expect("standard layout");
    for c in 0..g.channels {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let from = &src[row * ho * wo..(row + 1) * ho * wo];
                for oh in 0..ho {
                    let ih = (oh * g.stride.0 + ki) as isize - g.pad as isize;
                    if ih < 0 || ih >= h {
                        continue;
                    }
                    let base = (c as isize * h + ih) * w;
                    for ow in 0..wo {
                        let iw = (ow * g.stride.1 + kj) as isize - g.pad as isize;
                        if iw >= 0 && iw < w {
                            xs[(base + iw) as usize] += from[oh * wo + ow];
                        }
                    }
                }
            }
        }
    }
}

/// Square-kernel convolution without bias ("same" padding for odd kernels).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: (usize, usize),
}

impl Conv2d {
    pub fn new<T: Real>(
        ps: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = ps.he_normal(format!("{name}.weight"), &[out_channels, in_channels, kernel, kernel], fan_in, rng);
        Self {
            weight,
            in_channels,
            out_channels,
            kernel,
            stride,
        }
    }

    pub fn num_params(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    fn geom(&self, height: usize, width: usize) -> ConvGeom {
        ConvGeom {
            channels: self.in_channels,
            height,
            width,
            kernel: self.kernel,
            stride: self.stride,
            pad: self.kernel / 2,
        }
    }

    pub fn out_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let g = self.geom(height, width);
        (g.out_height(), g.out_width())
    }

    pub fn forward<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>) -> Array4<T> {
        let (n, _, h, w) = x.dim();
        let g = self.geom(h, w);
        let (ho, wo) = (g.out_height(), g.out_width());
        let wmat = ps.mat(self.weight);
        let mut cols = Array2::zeros((g.col_rows(), g.col_cols()));
        let mut out = Array4::zeros((n, self.out_channels, ho, wo));
        for i in 0..n {
            im2col(x.index_axis(Axis(0), i), &g, &mut cols);
            let mut o = out.index_axis_mut(Axis(0), i);
            let mut o2 = o.view_mut().into_shape_with_order((self.out_channels, ho * wo)).unwrap();
            general_mat_mul(T::one(), &wmat, &cols, T::zero(), &mut o2);
        }
        out
    }

    /// Accumulates the weight gradient and returns the input gradient.
    pub fn backward<T: Real>(&self, ps: &ParamStore<T>, grads: &mut Grads<T>, x: &Array4<T>, dy: &Array4<T>) -> Array4<T> {
        let (n, c, h, w) = x.dim();
        let g = self.geom(h, w);
        let (ho, wo) = (g.out_height(), g.out_width());
        let wmat = ps.mat(self.weight);
        let mut cols = Array2::zeros((g.col_rows(), g.col_cols()));
        let mut dcols = Array2::zeros((g.col_rows(), g.col_cols()));
        let mut dx = Array4::zeros((n, c, h, w));
        for i in 0..n {
            im2col(x.index_axis(Axis(0), i), &g, &mut cols);
            let dyi = dy.index_axis(Axis(0), i);
            let dy2 = dyi.into_shape_with_order((self.out_channels, ho * wo)).unwrap();
            general_mat_mul(T::one(), &dy2, &cols.t(), T::one(), &mut grads.mat_mut(self.weight));
            general_mat_mul(T::one(), &wmat.t(), &dy2, T::zero(), &mut dcols);
            col2im(&dcols, &g, &mut dx.index_axis_mut(Axis(0), i));
        }
        dx
    }
}

/// Stride-2, 3×3 transposed convolution with bias; doubles both spatial dims.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    /// `[in_channels, out_channels, 3, 3]`: the adjoint convolution's weight.
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvTranspose2d {
    pub const KERNEL: usize = 3;
    pub const STRIDE: usize = 2;

    pub fn new<T: Real>(ps: &mut ParamStore<T>, name: &str, in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let k = Self::KERNEL;
        // each output pixel receives contributions from in_channels * (k/stride)^2 inputs on average
        let fan_in = in_channels * k * k / (Self::STRIDE * Self::STRIDE);
        let weight = ps.he_normal(format!("{name}.weight"), &[in_channels, out_channels, k, k], fan_in.max(1), rng);
        let bias = ps.zeros(format!("{name}.bias"), &[out_channels], true);
        Self {
            weight,
            bias,
            in_channels,
            out_channels,
        }
    }

    pub fn num_params(&self) -> usize {
        self.in_channels * self.out_channels * Self::KERNEL * Self::KERNEL + self.out_channels
    }

    fn geom(&self, height: usize, width: usize) -> ConvGeom {
        ConvGeom {
            channels: self.out_channels,
            height: height * Self::STRIDE,
            width: width * Self::STRIDE,
            kernel: Self::KERNEL,
            stride: (Self::STRIDE, Self::STRIDE),
            pad: 1,
        }
    }

    pub fn forward<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>) -> Array4<T> {
        let (n, _, h, w) = x.dim();
        let g = self.geom(h, w);
        let wmat = ps.mat(self.weight);
        let bias = ps.get(self.bias);
        let mut cols = Array2::zeros((g.col_rows(), h * w));
        let mut out = Array4::zeros((n, self.out_channels, g.height, g.width));
        for i in 0..n {
            let xi = x.index_axis(Axis(0), i);
            let x2 = xi.into_shape_with_order((self.in_channels, h * w)).unwrap();
            general_mat_mul(T::one(), &wmat.t(), &x2, T::zero(), &mut cols);
            let mut oi = out.index_axis_mut(Axis(0), i);
            col2im(&cols, &g, &mut oi);
            for (c, &b) in bias.iter().enumerate() {
                oi.slice_mut(s![c, .., ..]).mapv_inplace(|v| v + b);
            }
        }
        out
    }

    pub fn backward<T: Real>(&self, ps: &ParamStore<T>, grads: &mut Grads<T>, x: &Array4<T>, dy: &Array4<T>) -> Array4<T> {
        let (n, _, h, w) = x.dim();
        let g = self.geom(h, w);
        let wmat = ps.mat(self.weight);
        let mut cols = Array2::zeros((g.col_rows(), h * w));
        let mut dx = Array4::zeros(x.raw_dim());
        for i in 0..n {
            let dyi = dy.index_axis(Axis(0), i);
            im2col(dyi.view(), &g, &mut cols);
            let xi = x.index_axis(Axis(0), i);
            let x2 = xi.into_shape_with_order((self.in_channels, h * w)).unwrap();
            general_mat_mul(T::one(), &x2, &cols.t(), T::one(), &mut grads.mat_mut(self.weight));
            let mut dxi = dx.index_axis_mut(Axis(0), i);
            let mut dx2 = dxi.view_mut().into_shape_with_order((self.in_channels, h * w)).unwrap();
            general_mat_mul(T::one(), &wmat, &cols, T::zero(), &mut dx2);
        }
        let db = dy.sum_axis(Axis(3)).sum_axis(Axis(2)).sum_axis(Axis(0));
        *grads.get_mut(self.bias) += &db.into_dyn();
        dx
    }
}
