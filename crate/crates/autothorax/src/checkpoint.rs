//! Network checkpoints.
//!
//! Little-endian layout: magic `AXNNCKPT`, u32 version, u32 layer count L,
//! f64 dropout, L+1 u32 widths, L u8 activation tags, then per layer the
//! f32 weights (`in x out`, row-major) and biases, then a CRC32 of every
//! preceding byte.

use std::fs;
use std::path::Path;

use autothorax_core::nn::{Activation, DenseLayer, Network};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AXNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn ck_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn encode_checkpoint(net: &Network<f32>) -> Vec<u8> {
    let layers = net.layers();
    let mut out = Vec::with_capacity(32 + net.parameter_count() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    out.extend_from_slice(&net.dropout().to_le_bytes());
    for d in net.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend(layers.iter().map(|l| l.activation().tag()));
    for l in layers {
        for x in l.weights().iter().chain(l.bias()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| ck_err("truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| ck_err("size overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network<f32>> {
    if bytes.len() < 4 + 8 {
        return Err(ck_err("truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if &body[..8] != CHECKPOINT_MAGIC {
        return Err(ck_err("bad magic, not a checkpoint"));
    }
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(ck_err("checksum mismatch, file is corrupt or was modified"));
    }
    let mut c = Cursor { bytes: body, at: 8 };
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ck_err(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let dropout = f64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"));
    let dims = (0..=count).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let activations = c
        .take(count)?
        .iter()
        .map(|&t| Activation::from_tag(t).ok_or_else(|| ck_err(format!("unknown activation tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let weights = c.f32s(dims[i].checked_mul(dims[i + 1]).ok_or_else(|| ck_err("size overflow"))?)?;
        let bias = c.f32s(dims[i + 1])?;
        layers.push(DenseLayer::new(dims[i], dims[i + 1], weights, bias, activations[i])?);
    }
    if c.at != body.len() {
        return Err(ck_err(format!("{} unexpected bytes before checksum", body.len() - c.at)));
    }
    Ok(Network::new(layers, dropout)?)
}

pub fn save_checkpoint(net: &Network<f32>, path: &Path) -> Result<()> {
    crate::write_file(path, &encode_checkpoint(net))
}

pub fn load_checkpoint(path: &Path) -> Result<Network<f32>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing {
            what: "encoder checkpoint",
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    decode_checkpoint(&bytes)
}

/// Provenance written next to each encoder checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSidecar {
    pub fold: usize,
    pub folds: usize,
    pub seed: u64,
    pub input_dim: usize,
    pub bottleneck: usize,
    pub hidden_schedule: Vec<usize>,
    pub pipeline: autothorax_core::encoder::EncoderPipelineConfig,
    pub archive_size: usize,
    pub step1_losses: Vec<f64>,
    pub step2_losses: Vec<f64>,
    pub checkpoint_crc32: u32,
    pub run: crate::config::RunConfig,
}

pub fn sidecar_path(checkpoint: &Path) -> std::path::PathBuf {
    checkpoint.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn net() -> Network<f32> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        Network::init(
            &[5, 3, 2],
            &[Activation::Relu, Activation::Sigmoid],
            0.25,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_and_tamper() {
        let bytes = encode_checkpoint(&net());
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(encode_checkpoint(&back), bytes);
        assert_eq!(back.dims(), vec![5, 3, 2]);
        for i in [0, 9, 30, bytes.len() - 1] {
            let mut t = bytes.clone();
            t[i] ^= 0x10;
            assert!(decode_checkpoint(&t).is_err(), "flip at {i}");
        }
        assert!(decode_checkpoint(&bytes[..bytes.len() - 5]).is_err());
    }
}
