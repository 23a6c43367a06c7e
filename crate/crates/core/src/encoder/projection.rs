use std::sync::OnceLock;

use crate::linalg::{gaussian_matrix, orthonormal_rows, top_right_singular_vectors, OrthoMethod, RealMatrix, SeededRng};
use crate::{Error, Result};

/// Wire size of a serialized [`ProjectionCode`].
pub const PROJECTION_CODE_BYTES: usize = 18;

/// Seeded description of a row-orthonormal `M x N` projection.
///
/// Only `(seed, M, N, method)` crosses the feedback link; both ends rebuild
/// the matrix from it. The matrix is materialized on first use and then
/// shared read-only.
#[derive(Clone, Debug)]
pub struct ProjectionCode {
    seed: u64,
    rows: usize,
    cols: usize,
    method: OrthoMethod,
    matrix: OnceLock<RealMatrix>,
}

impl PartialEq for ProjectionCode {
    fn eq(&self, other: &Self) -> bool {
        (self.seed, self.rows, self.cols, self.method)
            == (other.seed, other.rows, other.cols, other.method)
    }
}

impl Eq for ProjectionCode {}

impl ProjectionCode {
    pub fn new(seed: u64, rows: usize, cols: usize, method: OrthoMethod) -> Result<Self> {
        if rows == 0 || rows > cols {
            return Err(Error::invalid(format!(
                "projection needs 1 <= M <= N, got M={rows}, N={cols}"
            )));
        }
        if u32::try_from(cols).is_err() {
            return Err(Error::invalid(format!("N={cols} does not fit the wire format")));
        }
        Ok(ProjectionCode {
            seed,
            rows,
            cols,
            method,
            matrix: OnceLock::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `M`, the feedback length.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `N`, the CSI vector length.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn method(&self) -> OrthoMethod {
        self.method
    }

    pub fn compression_ratio(&self) -> f64 {
        self.rows as f64 / self.cols as f64
    }

    pub fn matrix(&self) -> Result<&RealMatrix> {
        if let Some(m) = self.matrix.get() {
            return Ok(m);
        }
        let built = self.build()?;
        // A concurrent caller may have won the race; both built the same matrix.
        Ok(self.matrix.get_or_init(|| built))
    }

    fn build(&self) -> Result<RealMatrix> {
        let mut rng = SeededRng::new(self.seed);
        match self.method {
            OrthoMethod::Svd => {
                let source = gaussian_matrix(&mut rng, self.cols, self.cols);
                top_right_singular_vectors(&source, self.rows)
            }
            OrthoMethod::Qr => {
                let source = gaussian_matrix(&mut rng, self.rows, self.cols);
                orthonormal_rows(&source, OrthoMethod::Qr)
            }
        }
    }

    /// `seed: u64 | M: u32 | N: u32 | method: u16`, all little-endian.
    pub fn to_bytes(&self) -> [u8; PROJECTION_CODE_BYTES] {
        let mut out = [0u8; PROJECTION_CODE_BYTES];
        out[0..8].copy_from_slice(&self.seed.to_le_bytes());
        out[8..12].copy_from_slice(&(self.rows as u32).to_le_bytes());
        out[12..16].copy_from_slice(&(self.cols as u32).to_le_bytes());
        out[16..18].copy_from_slice(&self.method.code().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PROJECTION_CODE_BYTES {
            return Err(Error::invalid(format!(
                "projection code is {PROJECTION_CODE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let seed = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let code = u16::from_le_bytes(bytes[16..18].try_into().unwrap());
        let method = OrthoMethod::from_code(code)
            .ok_or_else(|| Error::invalid(format!("unknown projection method code {code}")))?;
        ProjectionCode::new(seed, rows, cols, method)
    }
}

/// Builds and materializes the projection for `(seed, M, N, method)`.
pub fn generate_projection(seed: u64, rows: usize, cols: usize, method: OrthoMethod) -> Result<ProjectionCode> {
    let code = ProjectionCode::new(seed, rows, cols, method)?;
    code.matrix()?;
    Ok(code)
}
