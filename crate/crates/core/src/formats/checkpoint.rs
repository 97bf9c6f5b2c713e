//! Model checkpoint.
//!
//! ```text
//! antispoof-checkpoint v1
//! <key> = <value>            model spec, one per line
//! tensors <count>
//! <name> <d0>x<d1>x...       one line per tensor, store order
//! data
//! <row-major f32 LE payload of every tensor, in directory order>
//! ```

use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::dsp::FeatureKind;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec, Pooling};
use crate::scalar::Real;

const MAGIC: &str = "antispoof-checkpoint v1";

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::InvalidInput(format!("checkpoint: bad `{key}` entry `{x}`"))))
        .collect()
}

pub fn encode_checkpoint<T: Real>(model: &Model<T>) -> Vec<u8> {
    let s = &model.spec;
    let mut head = format!("{MAGIC}\n");
    head += &format!("input_kind = {}\n", s.input_kind);
    head += &format!("input_bins = {}\n", s.input_bins);
    head += &format!("pooling = {}\n", s.pooling);
    head += &format!("with_decoder = {}\n", s.with_decoder);
    head += &format!("stage_filters = {}\n", join(&s.stage_filters));
    head += &format!("stage_blocks = {}\n", join(&s.stage_blocks));
    head += &format!("decoder_filters = {}\n", join(&s.decoder_filters));
    let tensors = model.params.tensors();
    head += &format!("tensors {}\n", tensors.len());
    for t in tensors {
        let shape: Vec<String> = t.value.shape().iter().map(|d| d.to_string()).collect();
        head += &format!("{} {}\n", t.name, shape.join("x"));
    }
    head += "data\n";
    let mut out = head.into_bytes();
    for t in tensors {
        for &v in t.value.iter() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

/// Rebuilds the model from its spec and overwrites every tensor with the stored values.
pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Model<T>> {
    let bad = |m: String| Error::InvalidInput(format!("checkpoint: {m}"));
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8".into()))
    };
    if next_line()? != MAGIC {
        return Err(bad("missing magic line".into()));
    }
    let mut spec = ModelSpec::new(FeatureKind::Logspec, Pooling::Gap, false);
    let count: usize = loop {
        let line = next_line()?;
        if let Some(n) = line.strip_prefix("tensors ") {
            break n.trim().parse().map_err(|_| bad(format!("bad tensor count `{n}`")))?;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad header line `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "input_kind" => spec.input_kind = v.parse()?,
            "input_bins" => spec.input_bins = v.parse().map_err(|_| bad(format!("bad input_bins `{v}`")))?,
            "pooling" => spec.pooling = v.parse()?,
            "with_decoder" => spec.with_decoder = v.parse().map_err(|_| bad(format!("bad with_decoder `{v}`")))?,
            "stage_filters" => spec.stage_filters = parse_list(k, v)?,
            "stage_blocks" => spec.stage_blocks = parse_list(k, v)?,
            "decoder_filters" => spec.decoder_filters = parse_list(k, v)?,
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    };
    let mut directory = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next_line()?;
        let (name, shape) = line.rsplit_once(' ').ok_or_else(|| bad(format!("bad directory line `{line}`")))?;
        let shape: Vec<usize> = shape
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(format!("bad shape in `{line}`"))))
            .collect::<Result<_>>()?;
        directory.push((name.to_string(), shape));
    }
    if next_line()? != "data" {
        return Err(bad("missing data marker".into()));
    }

    let mut model = Model::<T>::new(spec, 0)?;
    if model.params.tensors().len() != count {
        return Err(bad(format!("spec builds {} tensors, file has {count}", model.params.tensors().len())));
    }
    let mut body = &bytes[pos..];
    for (t, (name, shape)) in model.params.tensors_mut().iter_mut().zip(&directory) {
        if &t.name != name || t.value.shape() != shape.as_slice() {
            return Err(bad(format!("tensor `{name}` {shape:?} does not match `{}` {:?}", t.name, t.value.shape())));
        }
        let n: usize = shape.iter().product();
        if body.len() < 4 * n {
            return Err(bad(format!("payload truncated in `{name}`")));
        }
        let values = body[..4 * n]
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        t.value = ArrayD::from_shape_vec(IxDyn(shape), values).expect("length checked");
        body = &body[4 * n..];
    }
    if !body.is_empty() {
        return Err(bad(format!("{} trailing bytes", body.len())));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(path: &Path, model: &Model<T>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Model<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
