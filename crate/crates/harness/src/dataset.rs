//! CSID1 channel datasets.
//!
//! Little-endian header: magic `CSID1`, `u32` sample count, `u32` subcarriers,
//! `u32` antennas, `u8` dtype (0 = interleaved `f32` complex). The payload is
//! sample-major, then row-major, with real and imaginary parts interleaved.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use csi_ppp_core::linalg::{Complex64, ComplexMatrix};
use csi_ppp_core::transform::ChannelSample;
use thiserror::Error;

pub const CSID1_MAGIC: &[u8; 5] = b"CSID1";
pub const HEADER_BYTES: usize = 5 + 4 + 4 + 4 + 1;
pub const DTYPE_F32_COMPLEX: u8 = 0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset i/o: {0}")]
    Io(#[from] io::Error),

    #[error("not a CSID1 dataset (magic {found:?})")]
    BadMagic { found: Vec<u8> },

    #[error("unknown dataset dtype {0}")]
    UnknownDtype(u8),

    #[error("dataset truncated: expected {expected} bytes, file has {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(u64),

    #[error("sample {index}: {reason}")]
    BadSample { index: usize, reason: String },

    #[error("samples disagree on shape: {0:?} vs {1:?}")]
    MixedShapes((usize, usize), (usize, usize)),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub num_samples: u32,
    pub subcarriers: u32,
    pub antennas: u32,
    pub dtype: u8,
}

impl DatasetHeader {
    pub fn payload_bytes(&self) -> u64 {
        u64::from(self.num_samples) * u64::from(self.subcarriers) * u64::from(self.antennas) * 8
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.len() < 5 || &bytes[..5] != CSID1_MAGIC {
            return Err(DatasetError::BadMagic {
                found: bytes[..bytes.len().min(5)].to_vec(),
            });
        }
        if bytes.len() < HEADER_BYTES {
            return Err(DatasetError::Truncated {
                expected: HEADER_BYTES as u64,
                actual: bytes.len() as u64,
            });
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let header = DatasetHeader {
            num_samples: word(5),
            subcarriers: word(9),
            antennas: word(13),
            dtype: bytes[17],
        };
        if header.dtype != DTYPE_F32_COMPLEX {
            return Err(DatasetError::UnknownDtype(header.dtype));
        }
        Ok(header)
    }
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Vec<ChannelSample>, DatasetError> {
    let header = DatasetHeader::parse(bytes)?;
    let expected = HEADER_BYTES as u64 + header.payload_bytes();
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(DatasetError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(DatasetError::TrailingBytes(actual - expected));
    }
    let (rows, cols) = (header.subcarriers as usize, header.antennas as usize);
    let per_sample = rows * cols * 8;
    if per_sample == 0 && header.num_samples > 0 {
        return Err(DatasetError::BadSample {
            index: 0,
            reason: format!("{rows}x{cols} channel has no entries"),
        });
    }
    let mut out = Vec::with_capacity(header.num_samples as usize);
    for (index, chunk) in bytes[HEADER_BYTES..].chunks_exact(per_sample.max(1)).take(header.num_samples as usize).enumerate() {
        let m = read_matrix(chunk, rows, cols);
        let sample = ChannelSample::new(m).map_err(|e| DatasetError::BadSample {
            index,
            reason: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

fn read_matrix(chunk: &[u8], rows: usize, cols: usize) -> ComplexMatrix {
    let f = |k: usize| f64::from(f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()));
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        Complex64::new(f(k), f(k + 1))
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ChannelSample>, DatasetError> {
    parse_dataset(&fs::read(path)?)
}

/// Serializes samples; values are narrowed to `f32`.
pub fn write_dataset(samples: &[ChannelSample], mut out: impl Write, empty_shape: (usize, usize)) -> Result<(), DatasetError> {
    let (rows, cols) = match samples.first() {
        Some(s) => (s.subcarriers(), s.antennas()),
        None => empty_shape,
    };
    if let Some(s) = samples.iter().find(|s| (s.subcarriers(), s.antennas()) != (rows, cols)) {
        return Err(DatasetError::MixedShapes((rows, cols), (s.subcarriers(), s.antennas())));
    }
    out.write_all(CSID1_MAGIC)?;
    out.write_all(&(samples.len() as u32).to_le_bytes())?;
    out.write_all(&(rows as u32).to_le_bytes())?;
    out.write_all(&(cols as u32).to_le_bytes())?;
    out.write_all(&[DTYPE_F32_COMPLEX])?;
    let mut buf = Vec::with_capacity(rows * cols * 8);
    for s in samples {
        buf.clear();
        for i in 0..rows {
            for j in 0..cols {
                let z = s.spatial_freq[(i, j)];
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_dataset(samples: &[ChannelSample], path: impl AsRef<Path>, empty_shape: (usize, usize)) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    write_dataset(samples, &mut buf, empty_shape)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use csi_ppp_core::linalg::{complex_gaussian_matrix, SeededRng};

    fn samples(n: usize, rows: usize, cols: usize) -> Vec<ChannelSample> {
        let mut rng = SeededRng::new(5);
        (0..n)
            .map(|_| {
                // Values already representable in f32 so the roundtrip is exact.
                let m = complex_gaussian_matrix(&mut rng, rows, cols)
                    .map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64));
                ChannelSample::new(m).unwrap()
            })
            .collect()
    }

    fn encode(s: &[ChannelSample]) -> Vec<u8> {
        let mut b = Vec::new();
        write_dataset(s, &mut b, (0, 0)).unwrap();
        b
    }

    #[test]
    fn roundtrip_bit_exact() {
        for (rows, cols) in [(3, 5), (1, 4), (4, 1)] {
            let s = samples(4, rows, cols);
            let back = parse_dataset(&encode(&s)).unwrap();
            assert_eq!(back.len(), 4);
            for (a, b) in s.iter().zip(&back) {
                assert_eq!(a.spatial_freq, b.spatial_freq);
            }
        }
    }

    #[test]
    fn payload_is_row_major_interleaved() {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 2.0),
                Complex64::new(3.0, 4.0),
                Complex64::new(5.0, 6.0),
                Complex64::new(7.0, 8.0),
            ],
        );
        let b = encode(&[ChannelSample::new(m).unwrap()]);
        let floats: Vec<f32> = b[HEADER_BYTES..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(floats, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(&b[..5], b"CSID1");
        assert_eq!(b[17], 0);
    }

    #[test]
    fn truncation_names_sizes() {
        let b = encode(&samples(2, 3, 4));
        let cut = &b[..b.len() - 3];
        match parse_dataset(cut) {
            Err(DatasetError::Truncated { expected, actual }) => {
                assert_eq!(expected, b.len() as u64);
                assert_eq!(actual, b.len() as u64 - 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_dataset(&b[..10]), Err(DatasetError::Truncated { .. })));
    }

    #[test]
    fn distinct_header_errors() {
        let mut b = encode(&samples(1, 2, 2));
        b[17] = 9;
        assert!(matches!(parse_dataset(&b), Err(DatasetError::UnknownDtype(9))));
        b[0] = b'X';
        assert!(matches!(parse_dataset(&b), Err(DatasetError::BadMagic { .. })));
        let mut b = encode(&samples(1, 2, 2));
        b.push(1);
        assert!(matches!(parse_dataset(&b), Err(DatasetError::TrailingBytes(1))));
    }

    #[test]
    fn empty_dataset_is_valid() {
        let b = encode(&[]);
        assert_eq!(b.len(), HEADER_BYTES);
        assert!(parse_dataset(&b).unwrap().is_empty());
    }

    #[test]
    fn non_finite_sample_rejected() {
        let mut b = encode(&samples(2, 2, 2));
        let at = HEADER_BYTES + 32 + 4;
        b[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(parse_dataset(&b), Err(DatasetError::BadSample { index: 1, .. })));
    }
}
