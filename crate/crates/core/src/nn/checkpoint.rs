//! Versioned binary checkpoints.
//!
//! ```text
//! "TOBM" | version: u16 | kind_len: u8 | kind: utf8 | n_layers: u32 | layer*
//! layer := tag: u8 | dims | params as f64 LE
//!   tag 0 dense:        in: u32 | out: u32 | activation: u8 | weight | bias
//!   tag 1 lstm:         in: u32 | hidden: u32 | w_x | w_h | bias
//!   tag 2 standardize:  dim: u32 | mean | scale
//! ```

use std::fs;
use std::path::Path;

use super::{Activation, Dense, Lstm, Standardizer};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TOBM";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerRecord {
    Dense(Dense),
    Lstm(Lstm),
    Standardize(Standardizer),
}

impl LayerRecord {
    pub fn name(&self) -> &'static str {
        match self {
            LayerRecord::Dense(_) => "dense",
            LayerRecord::Lstm(_) => "lstm",
            LayerRecord::Standardize(_) => "standardize",
        }
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(kind: &str, layers: &[LayerRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(kind.len() as u8);
    buf.extend_from_slice(kind.as_bytes());
    put_u32(&mut buf, layers.len());
    for layer in layers {
        match layer {
            LayerRecord::Dense(d) => {
                buf.push(0);
                put_u32(&mut buf, d.in_dim);
                put_u32(&mut buf, d.out_dim);
                buf.push(d.activation.tag());
                put_f64s(&mut buf, &d.weight);
                put_f64s(&mut buf, &d.bias);
            }
            LayerRecord::Lstm(l) => {
                buf.push(1);
                put_u32(&mut buf, l.in_dim);
                put_u32(&mut buf, l.hidden);
                put_f64s(&mut buf, &l.w_x);
                put_f64s(&mut buf, &l.w_h);
                put_f64s(&mut buf, &l.bias);
            }
            LayerRecord::Standardize(s) => {
                buf.push(2);
                put_u32(&mut buf, s.dim());
                put_f64s(&mut buf, &s.mean);
                put_f64s(&mut buf, &s.scale);
            }
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::Checkpoint("tensor size overflows".into())
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decodes a checkpoint and checks that it holds a model of `expected_kind`.
pub fn decode_checkpoint(bytes: &[u8], expected_kind: &str) -> Result<Vec<LayerRecord>> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind_len = r.u8()? as usize;
    let kind = String::from_utf8_lossy(r.take(kind_len)?).into_owned();
    if kind != expected_kind {
        return Err(Error::Checkpoint(format!(
            "expected a `{expected_kind}` model, found `{kind}`"
        )));
    }
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let layer = match r.u8()? {
            0 => {
                let (in_dim, out_dim) = (r.u32()?, r.u32()?);
                let tag = r.u8()?;
                let activation = Activation::from_tag(tag)
                    .ok_or_else(|| Error::Checkpoint(format!("unknown activation {tag}")))?;
                LayerRecord::Dense(Dense {
                    in_dim,
                    out_dim,
                    activation,
                    weight: r.f64s(in_dim * out_dim)?,
                    bias: r.f64s(out_dim)?,
                })
            }
            1 => {
                let (in_dim, hidden) = (r.u32()?, r.u32()?);
                LayerRecord::Lstm(Lstm {
                    in_dim,
                    hidden,
                    w_x: r.f64s(4 * hidden * in_dim)?,
                    w_h: r.f64s(4 * hidden * hidden)?,
                    bias: r.f64s(4 * hidden)?,
                })
            }
            2 => {
                let dim = r.u32()?;
                LayerRecord::Standardize(Standardizer {
                    mean: r.f64s(dim)?,
                    scale: r.f64s(dim)?,
                })
            }
            tag => return Err(Error::Checkpoint(format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.at
        )));
    }
    Ok(layers)
}

pub fn save_checkpoint(path: &Path, kind: &str, layers: &[LayerRecord]) -> Result<()> {
    fs::write(path, encode_checkpoint(kind, layers)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected_kind: &str) -> Result<Vec<LayerRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expected_kind)
}

/// Pops layers off the front of a decoded checkpoint with type checks.
pub struct LayerStack(std::vec::IntoIter<LayerRecord>);

impl LayerStack {
    pub fn new(layers: Vec<LayerRecord>) -> Self {
        Self(layers.into_iter())
    }

    pub fn dense(&mut self) -> Result<Dense> {
        match self.0.next() {
            Some(LayerRecord::Dense(d)) => Ok(d),
            other => Err(unexpected("dense", other)),
        }
    }

    pub fn lstm(&mut self) -> Result<Lstm> {
        match self.0.next() {
            Some(LayerRecord::Lstm(l)) => Ok(l),
            other => Err(unexpected("lstm", other)),
        }
    }

    pub fn standardize(&mut self) -> Result<Standardizer> {
        match self.0.next() {
            Some(LayerRecord::Standardize(s)) => Ok(s),
            other => Err(unexpected("standardize", other)),
        }
    }

    pub fn finish(mut self) -> Result<()> {
        match self.0.next() {
            None => Ok(()),
            Some(extra) => Err(Error::Checkpoint(format!(
                "unexpected extra `{}` layer",
                extra.name()
            ))),
        }
    }
}

fn unexpected(want: &str, got: Option<LayerRecord>) -> Error {
    Error::Checkpoint(match got {
        Some(l) => format!("expected a `{want}` layer, found `{}`", l.name()),
        None => format!("expected a `{want}` layer, found end of model"),
    })
}
