use faer::Mat;

use super::RealMatrix;
use crate::{Error, Result};

/// How a row-orthonormal matrix is extracted from a Gaussian source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrthoMethod {
    /// Top right singular vectors of the source.
    Svd,
    /// Householder QR of the source rows (R made positive on the diagonal).
    Qr,
}

impl OrthoMethod {
    pub fn code(self) -> u16 {
        match self {
            OrthoMethod::Svd => 0,
            OrthoMethod::Qr => 1,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(OrthoMethod::Svd),
            1 => Some(OrthoMethod::Qr),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OrthoMethod::Svd => "svd",
            OrthoMethod::Qr => "qr",
        }
    }
}

impl std::str::FromStr for OrthoMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(OrthoMethod::Svd),
            "qr" => Ok(OrthoMethod::Qr),
            other => Err(Error::invalid(format!("unknown orthonormalization method {other:?}"))),
        }
    }
}

fn to_faer(m: &RealMatrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn rank_tolerance(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Returns an `M x N` matrix `A` with `A A^T = I_M` spanning the row space
/// of `mat` (`M <= N`).
pub fn orthonormal_rows(mat: &RealMatrix, method: OrthoMethod) -> Result<RealMatrix> {
    let (m, n) = mat.shape();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= rows <= cols, got {m}x{n}")));
    }
    match method {
        OrthoMethod::Svd => top_right_singular_vectors(mat, m),
        OrthoMethod::Qr => qr_rows(mat),
    }
}

/// First `count` right singular vectors of `mat` (by descending singular
/// value), returned as the rows of a `count x ncols` matrix.
///
/// Each vector is sign-fixed so that its largest-magnitude entry (lowest index
/// on ties) is positive.
pub fn top_right_singular_vectors(mat: &RealMatrix, count: usize) -> Result<RealMatrix> {
    let (m, n) = mat.shape();
    if count == 0 || count > m.min(n) {
        return Err(Error::invalid(format!(
            "cannot take {count} singular vectors of a {m}x{n} matrix"
        )));
    }
    if !mat.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("source matrix has non-finite entries"));
    }
    let svd = to_faer(mat)
        .thin_svd()
        .map_err(|e| Error::RankDeficient(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let largest = s[0];
    if !(largest > 0.0) || s[count - 1] <= largest * rank_tolerance(m, n) {
        return Err(Error::RankDeficient(format!(
            "singular value {} of {} is {:e} (largest {:e})",
            count,
            m.min(n),
            s[count - 1],
            largest
        )));
    }
    let v = svd.V();
    let mut out = RealMatrix::zeros(count, n);
    for k in 0..count {
        let mut pivot = 0;
        for j in 1..n {
            if v[(j, k)].abs() > v[(pivot, k)].abs() {
                pivot = j;
            }
        }
        let sign = if v[(pivot, k)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            out[(k, j)] = sign * v[(j, k)];
        }
    }
    Ok(out)
}

fn qr_rows(mat: &RealMatrix) -> Result<RealMatrix> {
    let (m, n) = mat.shape();
    if !mat.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("source matrix has non-finite entries"));
    }
    // Factor the transpose: the columns of Q span the row space of `mat`.
    let qr = to_faer(&mat.transpose()).qr();
    let r = qr.thin_R();
    let q = qr.compute_thin_Q();
    let scale = (0..m).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    for i in 0..m {
        if !(r[(i, i)].abs() > scale * rank_tolerance(m, n)) {
            return Err(Error::RankDeficient(format!(
                "row {i} is linearly dependent on the previous rows"
            )));
        }
    }
    let mut out = RealMatrix::zeros(m, n);
    for i in 0..m {
        let sign = if r[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            out[(i, j)] = sign * q[(j, i)];
        }
    }
    Ok(out)
}
