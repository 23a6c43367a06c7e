//! Human-readable summaries of CSID1 and PPPW1 files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use csi_ppp_core::denoisers::{read_weights, PPPW1_MAGIC};

use crate::config::sha256_hex;
use crate::dataset::{parse_dataset, DatasetHeader, CSID1_MAGIC, HEADER_BYTES};
use crate::error::{HarnessError, Result};

pub fn inspect(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = String::new();
    writeln!(out, "file: {}", path.display()).unwrap();
    writeln!(out, "bytes: {}", bytes.len()).unwrap();
    writeln!(out, "sha256: {}", sha256_hex(&bytes)).unwrap();
    if bytes.starts_with(CSID1_MAGIC) {
        let dataset_err = |source| HarnessError::Dataset { path: path.to_path_buf(), source };
        let h = DatasetHeader::parse(&bytes).map_err(dataset_err)?;
        let samples = parse_dataset(&bytes).map_err(dataset_err)?;
        writeln!(out, "format: CSID1").unwrap();
        writeln!(out, "samples: {}", h.num_samples).unwrap();
        writeln!(out, "subcarriers: {}", h.subcarriers).unwrap();
        writeln!(out, "antennas: {}", h.antennas).unwrap();
        writeln!(out, "dtype: {} (f32 complex)", h.dtype).unwrap();
        writeln!(out, "payload_bytes: {}", bytes.len() - HEADER_BYTES).unwrap();
        if !samples.is_empty() {
            let mean = samples.iter().map(|s| s.spatial_freq.norm_squared()).sum::<f64>() / samples.len() as f64;
            writeln!(out, "mean_energy: {mean:.6}").unwrap();
        }
    } else if bytes.starts_with(PPPW1_MAGIC) {
        let model = read_weights(&bytes).map_err(|e| HarnessError::Core(e.into()))?;
        writeln!(out, "format: PPPW1").unwrap();
        writeln!(out, "layers: {}", model.layers().len()).unwrap();
        for (i, l) in model.layers().iter().enumerate() {
            writeln!(out, "  {i}: {} -> {} 3x3 {:?}", l.in_channels(), l.out_channels(), l.activation()).unwrap();
        }
        writeln!(out, "parameters: {}", model.parameter_count()).unwrap();
    } else {
        return Err(HarnessError::UnknownFormat(path.to_path_buf()));
    }
    Ok(out)
}
