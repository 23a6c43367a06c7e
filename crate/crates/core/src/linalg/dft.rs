use std::f64::consts::PI;

use super::{Complex64, ComplexMatrix};
use crate::{Error, Result};

/// Unitary DFT matrix, `F[j, k] = exp(-2 pi i j k / n) / sqrt(n)`.
///
/// The exponent is reduced modulo `n` before the trig call so large indices
/// do not lose phase accuracy.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::invalid("DFT size must be at least 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |j, k| {
        let phase = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    }))
}
