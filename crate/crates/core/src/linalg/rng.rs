use std::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::{Complex64, ComplexMatrix, RealMatrix};

/// Seeded ChaCha20 stream with a Box-Muller Gaussian front end.
///
/// Construction, kept stable so the user equipment and the base station can
/// regenerate the same projection from a shared seed:
///
/// * key: 32 bytes, the seed as little-endian `u64` in bytes `0..8`, zeros
///   elsewhere; 64-bit block counter and stream id both start at zero.
/// * uniforms: each `u64` word is the next 8 keystream bytes read
///   little-endian; `open01 = ((w >> 11) + 1) * 2^-53` lies in `(0, 1]`,
///   `closed_open01 = (w >> 11) * 2^-53` lies in `[0, 1)`.
/// * Gaussians: `u1 = open01`, `u2 = closed_open01` (in that order),
///   `r = sqrt(-2 ln u1)`, emit `r cos(2 pi u2)` then `r sin(2 pi u2)`.
///
/// Cloning forks the stream: both copies continue with identical output.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: ChaCha20Rng,
    spare: Option<f64>,
}

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        SeededRng {
            seed,
            stream: ChaCha20Rng::from_seed(key),
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Position in the keystream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.stream.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.stream.next_u64()
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        self.stream.fill_bytes(out);
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * INV_2_53
    }

    /// Uniform integer in `0..bound` by rejection, so the result is unbiased.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let w = self.next_u64();
            if w < zone {
                return w % bound;
            }
        }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// `rows x cols` matrix of i.i.d. standard normals, filled row-major.
pub fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> RealMatrix {
    let mut m = RealMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.next_gaussian();
        }
    }
    m
}

/// Circularly-symmetric complex normals with `E|z|^2 = 1`, filled row-major,
/// real part drawn before imaginary part.
pub fn complex_gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = rng.next_gaussian();
            let im = rng.next_gaussian();
            m[(i, j)] = Complex64::new(s * re, s * im);
        }
    }
    m
}
