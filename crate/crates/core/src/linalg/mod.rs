//! Deterministic numerical primitives shared by every stage.

mod dft;
mod ortho;
mod rng;
mod tensor;

use nalgebra::{Complex, DMatrix};

pub use dft::dft_matrix;
pub use ortho::{orthonormal_rows, top_right_singular_vectors, OrthoMethod};
pub use rng::{complex_gaussian_matrix, gaussian_matrix, SeededRng};
pub use tensor::{pixel_shuffle, pixel_unshuffle, RealTensor3};

pub type Complex64 = Complex<f64>;

/// Dense complex matrix. Spatial-frequency channels are `Ns x Nt`, rows are
/// subcarriers (or delay taps after the transform), columns are antennas.
pub type ComplexMatrix = DMatrix<Complex64>;

pub type RealMatrix = DMatrix<f64>;

/// Largest elementwise deviation of `a * a^T` from the identity.
pub fn gram_deviation(a: &RealMatrix) -> f64 {
    let gram = a * a.transpose();
    max_identity_deviation(&gram)
}

/// Largest elementwise deviation of a square real matrix from the identity.
pub fn max_identity_deviation(m: &RealMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

pub(crate) fn all_finite_complex(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
