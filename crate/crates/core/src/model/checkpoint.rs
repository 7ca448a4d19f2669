//! Trained model container.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic      b"BMC1"
//! version    u32 = 1
//! variant    u32 tag
//! n_dims     u32, then n_dims x u32 layer widths
//! per layer  u8 has_prelu, f64 slope, out*in f64 weights (row-major), out f64 bias
//! mean, std  input_dim f64 each
//! config     f64 lr, f64 lr_decay, u64 lr_decay_every, f64 margin, f64 l2_weight,
//!            u64 batch_size, u64 max_epochs, u64 patience, u64 seed
//! epoch      u64 (1-based epoch of the stored weights)
//! initial    f64 validation loss before training
//! history    u64 count, then count x (f64 train, f64 val)
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Dense, NetworkParams, Variant};
use super::train::{Normalization, TrainConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::io::write_atomic;
use crate::features::FrameSequence;

const MAGIC: &[u8; 4] = b"BMC1";
const VERSION: u32 = 1;
const EMBED_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub normalization: Normalization,
    pub config: TrainConfig,
    pub epoch: usize,
    pub initial_val_loss: f64,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn variant(&self) -> Variant {
        self.params.variant
    }

    pub fn best_val_loss(&self) -> f64 {
        self.history
            .iter()
            .map(|h| h.val_loss)
            .fold(f64::INFINITY, f64::min)
    }

    /// Embeddings of every frame of `seq`, one row per frame.
    pub fn embed(&self, seq: &FrameSequence, exec: &Exec) -> Result<Array2<f64>> {
        let x = self.normalization.apply(seq.data.view())?;
        let n = x.nrows();
        let parts = exec.map_range(n.div_ceil(EMBED_CHUNK), |c| {
            let rows = c * EMBED_CHUNK..((c + 1) * EMBED_CHUNK).min(n);
            self.params.encode_batch(x.slice(ndarray::s![rows, ..]))
        });
        let mut out = Array2::zeros((n, self.params.embedding_dim()));
        for (c, part) in parts.into_iter().enumerate() {
            let part = part?;
            let start = c * EMBED_CHUNK;
            out.slice_mut(ndarray::s![start..start + part.nrows(), ..])
                .assign(&part);
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u32(self.params.variant.tag());
        let dims = self.params.dims();
        w.u32(dims.len() as u32);
        for d in &dims {
            w.u32(*d as u32);
        }
        for l in &self.params.layers {
            w.0.push(l.slope.is_some() as u8);
            w.f64(l.slope.unwrap_or(0.0));
            w.f64s(l.weight.iter());
            w.f64s(l.bias.iter());
        }
        w.f64s(self.normalization.mean.iter());
        w.f64s(self.normalization.std.iter());
        let c = &self.config;
        w.f64(c.lr);
        w.f64(c.lr_decay);
        w.u64(c.lr_decay_every as u64);
        w.f64(c.margin);
        w.f64(c.l2_weight);
        w.u64(c.batch_size as u64);
        w.u64(c.max_epochs as u64);
        w.u64(c.patience as u64);
        w.u64(c.seed);
        w.u64(self.epoch as u64);
        w.f64(self.initial_val_loss);
        w.u64(self.history.len() as u64);
        for h in &self.history {
            w.f64(h.train_loss);
            w.f64(h.val_loss);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::InvalidCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::InvalidCheckpoint(format!("unsupported version {version}")));
        }
        let tag = r.u32()?;
        let variant = Variant::from_tag(tag)
            .ok_or_else(|| Error::InvalidCheckpoint(format!("unknown variant tag {tag}")))?;
        let n_dims = r.u32()? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::InvalidCheckpoint(format!("{n_dims} layer widths")));
        }
        let dims = (0..n_dims)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(n_dims - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let has_act = r.u8()? != 0;
            let slope = r.f64()?;
            let weight = Array2::from_shape_vec((fan_out, fan_in), r.f64s(fan_out * fan_in)?)
                .expect("sized");
            let bias = Array1::from(r.f64s(fan_out)?);
            layers.push(Dense {
                weight,
                bias,
                slope: has_act.then_some(slope),
            });
        }
        let mean = Array1::from(r.f64s(dims[0])?);
        let std = Array1::from(r.f64s(dims[0])?);
        let config = TrainConfig {
            lr: r.f64()?,
            lr_decay: r.f64()?,
            lr_decay_every: r.u64()? as usize,
            margin: r.f64()?,
            l2_weight: r.f64()?,
            batch_size: r.u64()? as usize,
            max_epochs: r.u64()? as usize,
            patience: r.u64()? as usize,
            seed: r.u64()?,
            dims: dims.clone(),
        };
        let epoch = r.u64()? as usize;
        let initial_val_loss = r.f64()?;
        let n_hist = r.u64()? as usize;
        if n_hist > bytes.len() / 16 {
            return Err(Error::InvalidCheckpoint("truncated history".into()));
        }
        let history = (0..n_hist)
            .map(|_| {
                Ok(EpochRecord {
                    train_loss: r.f64()?,
                    val_loss: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::InvalidCheckpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let params = NetworkParams { variant, layers };
        if !params.is_finite() {
            return Err(Error::InvalidCheckpoint("non-finite parameters".into()));
        }
        Ok(Self {
            params,
            normalization: Normalization { mean, std },
            config,
            epoch,
            initial_val_loss,
            history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
            .map_err(|e| match e {
                Error::InvalidCheckpoint(m) => {
                    Error::InvalidCheckpoint(format!("{}: {m}", path.display()))
                }
                other => other,
            })
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl Iterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidCheckpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::InvalidCheckpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
