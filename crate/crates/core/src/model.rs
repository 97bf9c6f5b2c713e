//! Thin 34-layer pre-activation ResNet with a GAP or GAVP pooling head, a sigmoid
//! output neuron and an optional transposed-convolution decoder.
//!
//! Inputs are `[N, 1, bins, frames]` batches of scaled features. Every 3×3
//! convolution uses "same" padding, so a stride `(sf, st)` maps `(f, t)` to
//! `(ceil(f / sf), ceil(t / st))`.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Array3, Array4, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, BnCache, Conv2d, ConvTranspose2d, Dense, Grads, ParamStore};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    /// Global average pooling: per-channel spatial mean.
    Gap,
    /// Global average and variance pooling: per-channel spatial mean and variance.
    Gavp,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Gap => "gap",
            Pooling::Gavp => "gavp",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gap" => Ok(Pooling::Gap),
            "gavp" => Ok(Pooling::Gavp),
            other => Err(Error::InvalidConfig(format!("unknown pooling `{other}`"))),
        }
    }
}

pub type Stride = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_kind: FeatureKind,
    /// Expected number of frequency rows in the input.
    pub input_bins: usize,
    pub pooling: Pooling,
    pub with_decoder: bool,
    pub stage_filters: Vec<usize>,
    pub stage_blocks: Vec<usize>,
    pub decoder_filters: Vec<usize>,
}

impl ModelSpec {
    /// Full-size network for `kind` at the default front end.
    pub fn new(input_kind: FeatureKind, pooling: Pooling, with_decoder: bool) -> Self {
        Self {
            input_kind,
            input_bins: match input_kind {
                FeatureKind::Lfbank => 80,
                FeatureKind::Logspec | FeatureKind::Gdgram => 401,
            },
            pooling,
            with_decoder,
            stage_filters: vec![16, 32, 64, 128],
            stage_blocks: vec![3, 4, 6, 3],
            decoder_filters: vec![32, 16, 8],
        }
    }

    /// Same layout with one block per stage and the given widths.
    pub fn tiny(input_kind: FeatureKind, input_bins: usize, pooling: Pooling, with_decoder: bool, filters: [usize; 4]) -> Self {
        Self {
            input_bins,
            stage_filters: filters.to_vec(),
            stage_blocks: vec![1, 1, 1, 1],
            decoder_filters: vec![4, 4, 2],
            ..Self::new(input_kind, pooling, with_decoder)
        }
    }

    /// `(stem stride, per-stage strides)` as `(frequency, time)`.
    pub fn strides(&self) -> (Stride, [Stride; 4]) {
        match self.input_kind {
            FeatureKind::Logspec | FeatureKind::Gdgram => ((2, 2), [(2, 2), (2, 2), (1, 1), (1, 1)]),
            FeatureKind::Lfbank => ((2, 2), [(1, 1), (1, 2), (2, 2), (2, 2)]),
        }
    }

    pub fn stem_filters(&self) -> usize {
        self.stage_filters[0]
    }

    pub fn final_channels(&self) -> usize {
        *self.stage_filters.last().expect("validated")
    }

    pub fn pooled_dim(&self) -> usize {
        match self.pooling {
            Pooling::Gap => self.final_channels(),
            Pooling::Gavp => 2 * self.final_channels(),
        }
    }

    /// Hidden width chosen so `pooled_dim * embedding_dim` is the same for both
    /// heads: 128×64 for GAP and 256×32 for GAVP at full width.
    pub fn embedding_dim(&self) -> usize {
        let c = self.final_channels();
        match self.pooling {
            Pooling::Gap => (c / 2).max(1),
            Pooling::Gavp => (c / 4).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.stage_filters.len() != 4 || self.stage_blocks.len() != 4 {
            return bad("stage_filters and stage_blocks need exactly 4 entries".into());
        }
        if self.stage_filters.contains(&0) || self.stage_blocks.contains(&0) {
            return bad("stage filters and block counts must be positive".into());
        }
        if self.with_decoder && (self.decoder_filters.len() != 3 || self.decoder_filters.contains(&0)) {
            return bad("decoder needs 3 positive filter counts".into());
        }
        if self.input_bins == 0 {
            return bad("input_bins must be positive".into());
        }
        Ok(())
    }

    /// Spatial dims after the stem and after each stage, for a `bins × frames` input.
    pub fn spatial_dims(&self, bins: usize, frames: usize) -> Vec<(usize, usize)> {
        let (stem, stages) = self.strides();
        let step = |(f, t): (usize, usize), (sf, st): Stride| (f.div_ceil(sf), t.div_ceil(st));
        let mut dims = vec![step((bins, frames), stem)];
        for s in stages {
            dims.push(step(*dims.last().unwrap(), s));
        }
        dims
    }
}

/// `relu(bn1(x)) -> conv1 -> relu(bn2(.)) -> conv2`, plus identity or a strided
/// 1×1 projection of the pre-activated input.
#[derive(Debug, Clone)]
pub struct PreActBlock {
    pub bn1: BatchNorm2d,
    pub conv1: Conv2d,
    pub bn2: BatchNorm2d,
    pub conv2: Conv2d,
    pub shortcut: Option<Conv2d>,
}

#[derive(Debug, Clone)]
struct BlockTape<T> {
    bn1: Option<BnCache<T>>,
    a1: Array4<T>,
    bn2: Option<BnCache<T>>,
    a2: Array4<T>,
}

fn relu<T: Real>(x: Array4<T>) -> Array4<T> {
    x.mapv_into(|v| v.max(T::zero()))
}

/// `grad * 1[act > 0]`.
fn relu_back<T: Real, D: ndarray::Dimension>(act: &ndarray::Array<T, D>, mut grad: ndarray::Array<T, D>) -> ndarray::Array<T, D> {
    Zip::from(&mut grad).and(act).for_each(|g, &a| {
        if a <= T::zero() {
            *g = T::zero();
        }
    });
    grad
}

fn bn_forward<T: Real>(bn: &BatchNorm2d, ps: &ParamStore<T>, x: &Array4<T>, train: bool) -> (Array4<T>, Option<BnCache<T>>) {
    if train {
        let (y, c) = bn.forward_train(ps, x);
        (y, Some(c))
    } else {
        (bn.forward_eval(ps, x), None)
    }
}

impl PreActBlock {
    fn new<T: Real>(ps: &mut ParamStore<T>, name: &str, cin: usize, cout: usize, stride: Stride, rng: &mut ChaCha8Rng) -> Self {
        let shortcut = (cin != cout || stride != (1, 1)).then(|| Conv2d::new(ps, &format!("{name}.shortcut"), cin, cout, 1, stride, rng));
        Self {
            bn1: BatchNorm2d::new(ps, &format!("{name}.bn1"), cin),
            conv1: Conv2d::new(ps, &format!("{name}.conv1"), cin, cout, 3, stride, rng),
            bn2: BatchNorm2d::new(ps, &format!("{name}.bn2"), cout),
            conv2: Conv2d::new(ps, &format!("{name}.conv2"), cout, cout, 3, (1, 1), rng),
            shortcut,
        }
    }

    fn forward<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>, train: bool) -> (Array4<T>, BlockTape<T>) {
        let (z1, bn1) = bn_forward(&self.bn1, ps, x, train);
        let a1 = relu(z1);
        let h1 = self.conv1.forward(ps, &a1);
        let (z2, bn2) = bn_forward(&self.bn2, ps, &h1, train);
        let a2 = relu(z2);
        let mut out = self.conv2.forward(ps, &a2);
        match &self.shortcut {
            Some(proj) => out += &proj.forward(ps, &a1),
            None => out += x,
        }
        (out, BlockTape { bn1, a1, bn2, a2 })
    }

    /// Inference-mode forward pass (running statistics).
    pub fn forward_infer<T: Real>(&self, ps: &ParamStore<T>, x: &Array4<T>) -> Array4<T> {
        self.forward(ps, x, false).0
    }

    fn backward<T: Real>(&self, ps: &ParamStore<T>, grads: &mut Grads<T>, tape: &BlockTape<T>, dout: &Array4<T>) -> Array4<T> {
        let da2 = self.conv2.backward(ps, grads, &tape.a2, dout);
        let dz2 = relu_back(&tape.a2, da2);
        let dh1 = self.bn2.backward(ps, grads, tape.bn2.as_ref().expect("training tape"), &dz2);
        let mut da1 = self.conv1.backward(ps, grads, &tape.a1, &dh1);
        let mut dx_short = None;
        match &self.shortcut {
            Some(proj) => da1 += &proj.backward(ps, grads, &tape.a1, dout),
            None => dx_short = Some(dout),
        }
        let dz1 = relu_back(&tape.a1, da1);
        let mut dx = self.bn1.backward(ps, grads, tape.bn1.as_ref().expect("training tape"), &dz1);
        if let Some(d) = dx_short {
            dx += d;
        }
        dx
    }

    fn commit<T: Real>(&self, ps: &mut ParamStore<T>, tape: &BlockTape<T>) {
        if let Some(c) = &tape.bn1 {
            self.bn1.update_running(ps, c);
        }
        if let Some(c) = &tape.bn2 {
            self.bn2.update_running(ps, c);
        }
    }

    pub fn num_params(&self) -> usize {
        self.bn1.num_params()
            + self.conv1.num_params()
            + self.bn2.num_params()
            + self.conv2.num_params()
            + self.shortcut.as_ref().map_or(0, |c| c.num_params())
    }
}

/// Per-channel spatial mean of one `[C, H, W]` conv output.
pub fn gap<T: Real>(conv_out: &Array3<T>) -> Array1<T> {
    let n = T::from_usize_lossy(conv_out.len_of(Axis(1)) * conv_out.len_of(Axis(2)));
    conv_out.axis_iter(Axis(0)).map(|ch| ch.sum() / n).collect()
}

/// Per-channel spatial mean followed by per-channel population variance.
pub fn gavp<T: Real>(conv_out: &Array3<T>) -> Array1<T> {
    let c = conv_out.len_of(Axis(0));
    let n = T::from_usize_lossy(conv_out.len_of(Axis(1)) * conv_out.len_of(Axis(2)));
    let mut out = Array1::zeros(2 * c);
    for (i, ch) in conv_out.axis_iter(Axis(0)).enumerate() {
        let m = ch.sum() / n;
        out[i] = m;
        out[c + i] = ch.fold(T::zero(), |acc, &v| acc + (v - m) * (v - m)) / n;
    }
    out
}

fn pool_batch<T: Real>(o: &Array4<T>, pooling: Pooling) -> Array2<T> {
    let (n, c, _, _) = o.dim();
    let width = match pooling {
        Pooling::Gap => c,
        Pooling::Gavp => 2 * c,
    };
    let mut out = Array2::zeros((n, width));
    for (i, sample) in o.axis_iter(Axis(0)).enumerate() {
        let sample = sample.to_owned();
        let p = match pooling {
            Pooling::Gap => gap(&sample),
            Pooling::Gavp => gavp(&sample),
        };
        out.row_mut(i).assign(&p);
    }
    out
}

fn pool_backward<T: Real>(o: &Array4<T>, pooled: &Array2<T>, dp: &Array2<T>, pooling: Pooling) -> Array4<T> {
    let (_, c, h, w) = o.dim();
    let n = T::from_usize_lossy(h * w);
    let two = T::lit(2.0);
    let mut d = Array4::zeros(o.raw_dim());
    for (i, mut di) in d.axis_iter_mut(Axis(0)).enumerate() {
        for ch in 0..c {
            let gm = dp[[i, ch]] / n;
            let mut dch = di.index_axis_mut(Axis(0), ch);
            match pooling {
                Pooling::Gap => dch.fill(gm),
                Pooling::Gavp => {
                    let mean = pooled[[i, ch]];
                    let gv = dp[[i, c + ch]] * two / n;
                    // the variance's dependence on the mean integrates to zero
                    Zip::from(&mut dch)
                        .and(&o.slice(s![i, ch, .., ..]))
                        .for_each(|g, &x| *g = gm + gv * (x - mean));
                }
            }
        }
    }
    d
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub layers: Vec<ConvTranspose2d>,
}

impl Decoder {
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.num_params()).sum()
    }
}

/// Result of a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub logits: Array1<T>,
    /// `sigmoid(logit)`: probability of the spoofed class.
    pub scores: Array1<T>,
    /// Post-ReLU hidden dense activations feeding the output neuron.
    pub embeddings: Array2<T>,
    /// Output of the last convolutional stage, after its final BN-ReLU.
    pub conv_out: Array4<T>,
    /// Decoder output cropped or zero-padded to the input shape.
    pub reconstruction: Option<Array3<T>>,
}

/// Intermediate activations kept for [`Model::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    input: Array4<T>,
    blocks: Vec<BlockTape<T>>,
    final_bn: Option<BnCache<T>>,
    pooled: Array2<T>,
    decoder_acts: Vec<Array4<T>>,
    decoder_raw_dims: (usize, usize),
    train: bool,
}

/// Loss gradients with respect to the model's outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads<T> {
    pub logits: Array1<T>,
    pub embeddings: Option<Array2<T>>,
    pub reconstruction: Option<Array3<T>>,
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub params: ParamStore<T>,
    stem: Conv2d,
    blocks: Vec<PreActBlock>,
    final_bn: BatchNorm2d,
    hidden: Dense,
    out: Dense,
    decoder: Option<Decoder>,
}

impl<T: Real> Model<T> {
    /// Builds and initializes the network; initialization is a function of `seed` only.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamStore::new();
        let (stem_stride, stage_strides) = spec.strides();
        let stem = Conv2d::new(&mut ps, "stem", 1, spec.stem_filters(), 3, stem_stride, &mut rng);
        let mut blocks = Vec::new();
        let mut cin = spec.stem_filters();
        for (s, ((&cout, &count), &stride)) in spec.stage_filters.iter().zip(&spec.stage_blocks).zip(&stage_strides).enumerate() {
            for b in 0..count {
                let st = if b == 0 { stride } else { (1, 1) };
                blocks.push(PreActBlock::new(&mut ps, &format!("res{}.{}", s + 1, b), cin, cout, st, &mut rng));
                cin = cout;
            }
        }
        let final_bn = BatchNorm2d::new(&mut ps, "final_bn", cin);
        let hidden = Dense::new(&mut ps, "hidden", spec.pooled_dim(), spec.embedding_dim(), &mut rng);
        let out = Dense::new(&mut ps, "out", spec.embedding_dim(), 1, &mut rng);
        let decoder = spec.with_decoder.then(|| {
            let mut prev = cin;
            let layers = spec
                .decoder_filters
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let l = ConvTranspose2d::new(&mut ps, &format!("decoder.{i}"), prev, f, &mut rng);
                    prev = f;
                    l
                })
                .collect();
            Decoder { layers }
        });
        Ok(Self {
            spec,
            params: ps,
            stem,
            blocks,
            final_bn,
            hidden,
            out,
            decoder,
        })
    }

    pub fn blocks(&self) -> &[PreActBlock] {
        &self.blocks
    }

    pub fn num_params(&self) -> usize {
        self.params.num_trainable()
    }

    pub fn decoder_params(&self) -> usize {
        self.decoder.as_ref().map_or(0, |d| d.num_params())
    }

    /// Trainable parameters excluding the decoder.
    pub fn backbone_params(&self) -> usize {
        self.num_params() - self.decoder_params()
    }

    pub fn output_bias(&self) -> T {
        self.params.get(self.out.bias)[0]
    }

    pub fn set_output_bias(&mut self, b: T) {
        self.params.get_mut(self.out.bias)[0] = b;
    }

    /// Zeroes the output neuron's weights (its bias is left alone).
    pub fn zero_output_weights(&mut self) {
        self.params.get_mut(self.out.weight).fill(T::zero());
    }

    /// Runs the network. `train` selects batch statistics in normalization layers
    /// and records what [`Model::backward`] needs.
    pub fn forward(&self, x: &Array4<T>, train: bool) -> (ForwardOutput<T>, Tape<T>) {
        let ps = &self.params;
        let mut h = self.stem.forward(ps, x);
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (next, tape) = b.forward(ps, &h, train);
            h = next;
            tapes.push(tape);
        }
        let (z, final_bn) = bn_forward(&self.final_bn, ps, &h, train);
        let conv_out = relu(z);

        let pooled = pool_batch(&conv_out, self.spec.pooling);
        let embeddings = self.hidden.forward(ps, &pooled).mapv_into(|v| v.max(T::zero()));
        let logits = self.out.forward(ps, &embeddings).column(0).to_owned();
        let scores = logits.mapv(sigmoid);

        let (_, _, bins, frames) = x.dim();
        let mut decoder_acts = Vec::new();
        let mut decoder_raw_dims = (0, 0);
        let reconstruction = self.decoder.as_ref().map(|dec| {
            let mut a = conv_out.clone();
            for (i, layer) in dec.layers.iter().enumerate() {
                let mut y = layer.forward(ps, &a);
                if i + 1 < dec.layers.len() {
                    y = relu(y);
                }
                decoder_acts.push(std::mem::replace(&mut a, y));
            }
            let (_, _, rh, rw) = a.dim();
            decoder_raw_dims = (rh, rw);
            let mean = a.mean_axis(Axis(1)).expect("non-empty channels");
            fit_to_shape(&mean, bins, frames)
        });

        let out = ForwardOutput {
            logits,
            scores,
            embeddings,
            conv_out,
            reconstruction,
        };
        let tape = Tape {
            input: x.clone(),
            blocks: tapes,
            final_bn,
            pooled,
            decoder_acts,
            decoder_raw_dims,
            train,
        };
        (out, tape)
    }

    /// Accumulates parameter gradients for the given output gradients.
    ///
    /// # Panics
    /// If `tape` comes from an inference-mode forward pass.
    pub fn backward(&self, out: &ForwardOutput<T>, tape: &Tape<T>, og: &OutputGrads<T>) -> Grads<T> {
        assert!(tape.train, "backward needs a training-mode forward pass");
        let ps = &self.params;
        let mut grads = ps.zero_grads();

        let dlogit = og.logits.view().insert_axis(Axis(1)).to_owned();
        let mut demb = self.out.backward(ps, &mut grads, &out.embeddings, &dlogit);
        if let Some(extra) = &og.embeddings {
            demb += extra;
        }
        let dhidden = relu_back(&out.embeddings, demb);
        let dpooled = self.hidden.backward(ps, &mut grads, &tape.pooled, &dhidden);
        let mut dconv = pool_backward(&out.conv_out, &tape.pooled, &dpooled, self.spec.pooling);

        if let (Some(dec), Some(drec)) = (&self.decoder, &og.reconstruction) {
            let (rh, rw) = tape.decoder_raw_dims;
            let channels = *self.spec.decoder_filters.last().unwrap();
            let dmean = fit_to_shape(drec, rh, rw);
            let inv = T::one() / T::from_usize_lossy(channels);
            let n = dmean.len_of(Axis(0));
            let mut dy = Array4::from_shape_fn((n, channels, rh, rw), |(i, _, a, b)| dmean[[i, a, b]] * inv);
            for (i, layer) in dec.layers.iter().enumerate().rev() {
                let input = &tape.decoder_acts[i];
                let dx = layer.backward(ps, &mut grads, input, &dy);
                dy = if i > 0 { relu_back(input, dx) } else { dx };
            }
            dconv += &dy;
        }

        let dz = relu_back(&out.conv_out, dconv);
        let mut dh = self.final_bn.backward(ps, &mut grads, tape.final_bn.as_ref().expect("training tape"), &dz);
        for (i, b) in self.blocks.iter().enumerate().rev() {
            dh = b.backward(ps, &mut grads, &tape.blocks[i], &dh);
        }
        let _ = self.stem.backward(ps, &mut grads, &tape.input, &dh);
        grads
    }

    /// Folds the batch statistics of a training forward pass into the running statistics.
    pub fn commit_batch_stats(&mut self, tape: &Tape<T>) {
        for (b, t) in self.blocks.iter().zip(&tape.blocks) {
            b.commit(&mut self.params, t);
        }
        if let Some(c) = &tape.final_bn {
            self.final_bn.update_running(&mut self.params, c);
        }
    }

    pub fn check_input(&self, x: &FeatureMatrix<T>) -> Result<()> {
        if x.kind != self.spec.input_kind {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.spec.input_kind, x.kind
            )));
        }
        if x.bins() != self.spec.input_bins || x.frames() == 0 {
            return Err(Error::InvalidInput(format!(
                "model expects {} frequency rows, got {}x{}",
                self.spec.input_bins,
                x.bins(),
                x.frames()
            )));
        }
        Ok(())
    }

    /// Inference on one utterance: `(embedding, conv output [C, H, W], score)`.
    pub fn embed(&self, x: &FeatureMatrix<T>) -> Result<(Array1<T>, Array3<T>, T)> {
        self.check_input(x)?;
        let batch = stack_features(&[x])?;
        let (out, _) = self.forward(&batch, false);
        Ok((
            out.embeddings.row(0).to_owned(),
            out.conv_out.index_axis(Axis(0), 0).to_owned(),
            out.scores[0],
        ))
    }

    /// Inference-mode logits for a list of utterances.
    pub fn logits(&self, xs: &[&FeatureMatrix<T>]) -> Result<Vec<T>> {
        for x in xs {
            self.check_input(x)?;
        }
        let batch = stack_features(xs)?;
        Ok(self.forward(&batch, false).0.logits.to_vec())
    }
}

/// Crops or zero-pads the trailing two axes of `[N, H, W]` to `[N, rows, cols]`.
pub fn fit_to_shape<T: Real>(x: &Array3<T>, rows: usize, cols: usize) -> Array3<T> {
    let (n, h, w) = x.dim();
    let mut out = Array3::zeros((n, rows, cols));
    let (r, c) = (h.min(rows), w.min(cols));
    out.slice_mut(s![.., ..r, ..c]).assign(&x.slice(s![.., ..r, ..c]));
    out
}

/// Stacks same-shaped features into a `[N, 1, bins, frames]` batch.
pub fn stack_features<T: Real>(xs: &[&FeatureMatrix<T>]) -> Result<Array4<T>> {
    let first = xs.first().ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
    let (bins, frames) = first.shape();
    let mut out = Array4::zeros((xs.len(), 1, bins, frames));
    for (i, x) in xs.iter().enumerate() {
        if x.shape() != (bins, frames) {
            return Err(Error::InvalidInput(format!(
                "batch mixes shapes {bins}x{frames} and {}x{}",
                x.bins(),
                x.frames()
            )));
        }
        out.slice_mut(s![i, 0, .., ..]).assign(&x.data);
    }
    Ok(out)
}

/// Decoder reconstruction of one conv output, for inspection.
pub fn decode<T: Real>(model: &Model<T>, conv_out: &Array3<T>, target: (usize, usize)) -> Result<Array2<T>> {
    let dec = model
        .decoder
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("model was built without a decoder".into()))?;
    let mut a: Array4<T> = conv_out.view().insert_axis(Axis(0)).to_owned();
    for (i, layer) in dec.layers.iter().enumerate() {
        a = layer.forward(&model.params, &a);
        if i + 1 < dec.layers.len() {
            a = relu(a);
        }
    }
    let mean = a.mean_axis(Axis(1)).expect("non-empty channels");
    Ok(fit_to_shape(&mean, target.0, target.1).index_axis_move(Axis(0), 0))
}
