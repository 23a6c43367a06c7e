//! PPPW1 weights files.
//!
//! Little-endian: magic `PPPW1`, `u32` layer count, then per layer `u32`
//! in_ch, `u32` out_ch, `u32` kernel, `u8` activation tag, `f32` weights in
//! `[out][in][k][k]` order and `f32` bias. No padding anywhere.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::cnn::{Activation, ConvLayer, DenoiserModel, KERNEL};

pub const PPPW1_MAGIC: &[u8; 5] = b"PPPW1";

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weights file i/o: {0}")]
    Io(#[from] io::Error),

    #[error("not a PPPW1 file (magic {found:?})")]
    BadMagic { found: Vec<u8> },

    #[error("weights file truncated: need {needed} bytes at offset {offset}, {available} left")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("{0} unexpected trailing bytes after the last layer")]
    TrailingBytes(usize),

    #[error("model has no layers")]
    NoLayers,

    #[error("layer has zero channels")]
    EmptyLayer,

    #[error("layer {layer}: kernel size {kernel}, only 3 is supported")]
    BadKernel { layer: usize, kernel: u32 },

    #[error("layer {layer}: unknown activation tag {tag}")]
    BadActivation { layer: usize, tag: u8 },

    #[error("final layer activation must be tanh, found tag {found}")]
    FinalActivation { found: u8 },

    #[error("layer {layer}: expected {expected} input channels, found {found}")]
    ChannelMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("layer parameter count {found}, expected {expected}")]
    ParameterCount { expected: usize, found: usize },

    #[error("non-finite weight{}", .layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    NonFinite { layer: Option<usize> },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(WeightsError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WeightsError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>, WeightsError> {
        let bytes = self.take(count.checked_mul(4).ok_or(WeightsError::Truncated {
            offset: self.pos,
            needed: usize::MAX,
            available: self.bytes.len() - self.pos,
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_weights(bytes: &[u8]) -> Result<DenoiserModel, WeightsError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(5).map_err(|_| WeightsError::BadMagic {
        found: bytes[..bytes.len().min(5)].to_vec(),
    })?;
    if magic != PPPW1_MAGIC {
        return Err(WeightsError::BadMagic { found: magic.to_vec() });
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for idx in 0..count {
        let in_ch = cur.u32()? as usize;
        let out_ch = cur.u32()? as usize;
        let kernel = cur.u32()?;
        let tag = cur.u8()?;
        if kernel as usize != KERNEL {
            return Err(WeightsError::BadKernel { layer: idx, kernel });
        }
        let activation = Activation::from_tag(tag).ok_or(WeightsError::BadActivation { layer: idx, tag })?;
        if in_ch == 0 || out_ch == 0 {
            return Err(WeightsError::EmptyLayer);
        }
        if let Some(prev) = layers.last().map(ConvLayer::out_channels) {
            if prev != in_ch {
                return Err(WeightsError::ChannelMismatch {
                    layer: idx,
                    expected: prev,
                    found: in_ch,
                });
            }
        }
        let weights = cur.f32s(out_ch * in_ch * KERNEL * KERNEL)?;
        let bias = cur.f32s(out_ch)?;
        let layer = ConvLayer::new(in_ch, out_ch, activation, weights, bias).map_err(|e| match e {
            WeightsError::NonFinite { .. } => WeightsError::NonFinite { layer: Some(idx) },
            other => other,
        })?;
        layers.push(layer);
    }
    let left = bytes.len() - cur.pos;
    if left != 0 {
        return Err(WeightsError::TrailingBytes(left));
    }
    DenoiserModel::new(layers)
}

pub fn write_weights(model: &DenoiserModel, mut out: impl Write) -> io::Result<()> {
    out.write_all(PPPW1_MAGIC)?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for layer in model.layers() {
        out.write_all(&(layer.in_channels() as u32).to_le_bytes())?;
        out.write_all(&(layer.out_channels() as u32).to_le_bytes())?;
        out.write_all(&(KERNEL as u32).to_le_bytes())?;
        out.write_all(&[layer.activation().tag()])?;
        for w in layer.weights().iter().chain(layer.bias()) {
            out.write_all(&w.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<DenoiserModel, WeightsError> {
    read_weights(&fs::read(path)?)
}

pub fn save_weights(model: &DenoiserModel, path: impl AsRef<Path>) -> Result<(), WeightsError> {
    let mut buf = Vec::new();
    write_weights(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;

    fn model() -> DenoiserModel {
        let mut rng = SeededRng::new(21);
        let mut layer = |cin: usize, cout: usize, act| {
            let w = (0..cout * cin * 9).map(|_| rng.next_gaussian() as f32).collect();
            let b = (0..cout).map(|_| rng.next_gaussian() as f32).collect();
            ConvLayer::new(cin, cout, act, w, b).unwrap()
        };
        DenoiserModel::new(vec![
            layer(9, 6, Activation::Relu),
            layer(6, 6, Activation::Linear),
            layer(6, 8, Activation::Tanh),
        ])
        .unwrap()
    }

    fn bytes(m: &DenoiserModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_weights(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn roundtrip_through_file() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pppw1");
        save_weights(&m, &path).unwrap();
        assert_eq!(load_weights(&path).unwrap(), m);
        assert_eq!(fs::read(&path).unwrap(), bytes(&m));
    }

    #[test]
    fn layout_is_packed() {
        let m = model();
        let b = bytes(&m);
        let per_layer: usize = m.layers().iter().map(|l| 13 + 4 * l.parameter_count()).sum();
        assert_eq!(b.len(), 5 + 4 + per_layer);
        assert_eq!(&b[..5], b"PPPW1");
        assert_eq!(u32::from_le_bytes(b[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 9);
        assert_eq!(u32::from_le_bytes(b[13..17].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(b[17..21].try_into().unwrap()), 3);
        assert_eq!(b[21], 0);
        let w0 = f32::from_le_bytes(b[22..26].try_into().unwrap());
        assert_eq!(w0.to_bits(), m.layers()[0].weights()[0].to_bits());
    }

    #[test]
    fn corrupted_magic() {
        let mut b = bytes(&model());
        b[0] = b'X';
        assert!(matches!(read_weights(&b), Err(WeightsError::BadMagic { .. })));
        assert!(matches!(read_weights(b"PP"), Err(WeightsError::BadMagic { .. })));
    }

    #[test]
    fn truncation_detected() {
        let b = bytes(&model());
        for cut in [7, 20, b.len() - 1] {
            assert!(
                matches!(read_weights(&b[..cut]), Err(WeightsError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut b = bytes(&model());
        b.push(0);
        assert!(matches!(read_weights(&b), Err(WeightsError::TrailingBytes(1))));
    }

    #[test]
    fn channel_chain_checked() {
        let mut b = bytes(&model());
        // Second layer header starts after the first layer's payload.
        let second = 9 + 13 + 4 * (6 * 9 * 9 + 6);
        b[second..second + 4].copy_from_slice(&5u32.to_le_bytes());
        assert!(matches!(
            read_weights(&b),
            Err(WeightsError::ChannelMismatch { layer: 1, expected: 6, found: 5 })
        ));
    }

    #[test]
    fn bad_activation_and_kernel() {
        let mut b = bytes(&model());
        b[21] = 7;
        assert!(matches!(read_weights(&b), Err(WeightsError::BadActivation { layer: 0, tag: 7 })));
        let mut b = bytes(&model());
        b[17..21].copy_from_slice(&5u32.to_le_bytes());
        assert!(matches!(read_weights(&b), Err(WeightsError::BadKernel { layer: 0, kernel: 5 })));
    }

    #[test]
    fn non_finite_weight() {
        let mut b = bytes(&model());
        b[22..26].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_weights(&b), Err(WeightsError::NonFinite { layer: Some(0) })));
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(load_weights("/nonexistent/x.pppw1"), Err(WeightsError::Io(_))));
    }
}
