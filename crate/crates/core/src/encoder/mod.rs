//! User-equipment side: seeded projection, compression and feedback
//! quantization.

mod projection;
mod quantizer;

pub use projection::{generate_projection, ProjectionCode, PROJECTION_CODE_BYTES};
pub use quantizer::{QuantizerConfig, DEFAULT_MU};

use nalgebra::DVector;

use crate::transform::CsiVector;
use crate::{Error, Result};

/// What the user equipment sends back for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback {
    /// `y = A h`, or its dequantized reconstruction when `codes` is set.
    pub values: DVector<f64>,
    pub codes: Option<Vec<u16>>,
    pub quant: Option<QuantizerConfig>,
}

impl Feedback {
    pub fn raw(values: DVector<f64>) -> Self {
        Feedback {
            values,
            codes: None,
            quant: None,
        }
    }

    /// Quantizes `values` and replaces them with the dequantized feedback the
    /// base station would see.
    pub fn quantize(self, q: &QuantizerConfig) -> Result<Feedback> {
        let codes = q.quantize(self.values.as_slice());
        let values = DVector::from_vec(q.dequantize(&codes)?);
        Ok(Feedback {
            values,
            codes: Some(codes),
            quant: Some(*q),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `y = A h` (noiseless; quantization is a separate step).
pub fn compress(code: &ProjectionCode, h: &CsiVector) -> Result<Feedback> {
    if h.len() != code.cols() {
        return Err(Error::invalid(format!(
            "CSI vector has length {}, projection expects {}",
            h.len(),
            code.cols()
        )));
    }
    let a = code.matrix()?;
    Ok(Feedback::raw(a * h.values()))
}
