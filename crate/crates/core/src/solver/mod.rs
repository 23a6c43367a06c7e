//! Base-station reconstruction: sparse initialization followed by
//! half-quadratic splitting with a plugged-in denoiser.
//!
//! Each iteration solves the data-fidelity step in closed form,
//!
//! ```text
//! z = (A^T A + rho I)^-1 (A^T y + rho h)
//! ```
//!
//! then denoises `z` at noise level `sqrt(lambda / (2 rho))` and grows `rho`
//! by `alpha`.

mod init;
mod tune;

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};

pub use init::{init_support_ls, least_squares_on_support, omp_baseline, top_k_indices, SparseEstimate};
pub use tune::{tune, TuneGrid, TuneInstance, TuneOutcome, TuneRow};

use crate::denoisers::{Denoiser, NoiseLevel};
use crate::linalg::RealMatrix;
use crate::metrics::nmse_real;
use crate::transform::{CsiVector, GridShape};
use crate::{Error, Result};

/// How the data-fidelity step is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZPath {
    /// Cholesky solve of the `N x N` system. Works for any `A`.
    Direct,
    /// `z = h + A^T (y - A h) / (1 + rho)`, valid when `A A^T = I`.
    #[default]
    Woodbury,
}

/// Which iterate is returned as the reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimate {
    /// The last data-consistent iterate.
    #[default]
    Z,
    /// The last denoised iterate.
    H,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho0: f64,
    pub alpha: f64,
    pub max_iters: usize,
    /// Support size for the initial estimate; `None` means `M / 4`.
    pub init_sparsity: Option<usize>,
    /// Relative-change stopping threshold; 0 runs all iterations.
    pub tol: f64,
    pub estimate: Estimate,
    pub z_path: ZPath,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 2e-3,
            rho0: 1e-3,
            alpha: 1.8,
            max_iters: 10,
            init_sparsity: None,
            tol: 0.0,
            estimate: Estimate::Z,
            z_path: ZPath::Woodbury,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.lambda) || !pos(self.rho0) {
            return Err(Error::invalid(format!(
                "lambda and rho0 must be positive, got {} and {}",
                self.lambda, self.rho0
            )));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.init_sparsity == Some(0) {
            return Err(Error::invalid("init_sparsity must be at least 1"));
        }
        Ok(())
    }

    /// Support size actually used for `m` measurements.
    pub fn sparsity_for(&self, m: usize) -> usize {
        self.init_sparsity.unwrap_or((m / 4).max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// `||y - A z||`.
    pub residual: f64,
    /// Linear NMSE of the returned iterate kind against the truth, if given.
    pub nmse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub init_residual: f64,
    pub init_nmse: Option<f64>,
    pub ridge_fallback: bool,
}

pub const TRACE_CSV_HEADER: &str = "iter,rho,sigma,residual,nmse";

impl SolverTrace {
    /// `iter,rho,sigma,residual,nmse` rows; `nmse` in dB, empty when unknown.
    pub fn csv_rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                let mut line = format!("{},{:e},{:e},{:e},", r.iter, r.rho, r.sigma, r.residual);
                if let Some(n) = r.nmse {
                    write!(line, "{}", crate::metrics::to_db(n)).unwrap();
                }
                line
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for row in self.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn final_nmse(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.nmse)
    }
}

fn check_dims(a: &RealMatrix, y: &DVector<f64>, h: &DVector<f64>) -> Result<()> {
    if y.len() != a.nrows() || h.len() != a.ncols() {
        return Err(Error::shape(format!(
            "A is {}x{}, y has {}, h has {}",
            a.nrows(),
            a.ncols(),
            y.len(),
            h.len()
        )));
    }
    Ok(())
}

/// `(A^T A + rho I)^-1 (A^T y + rho h)`.
pub fn z_update(a: &RealMatrix, y: &DVector<f64>, h: &DVector<f64>, rho: f64, path: ZPath) -> Result<DVector<f64>> {
    check_dims(a, y, h)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    match path {
        ZPath::Woodbury => Ok(woodbury(a, y, h, rho)),
        ZPath::Direct => {
            let n = a.ncols();
            let system = a.transpose() * a + DMatrix::identity(n, n) * rho;
            let rhs = a.transpose() * y + h * rho;
            let chol = Cholesky::new(system).ok_or_else(|| Error::invalid("normal matrix is not positive definite"))?;
            Ok(chol.solve(&rhs))
        }
    }
}

/// Equal to `(1/rho)(r - A^T A r / (1 + rho))` with `r = A^T y + rho h`, but
/// without dividing by `rho`, so it stays accurate for tiny penalties.
fn woodbury(a: &RealMatrix, y: &DVector<f64>, h: &DVector<f64>, rho: f64) -> DVector<f64> {
    let misfit = y - a * h;
    h + a.tr_mul(&misfit) / (1.0 + rho)
}

/// Runs the reconstruction loop from feedback `y`. `shape` is the grid the
/// denoiser sees; `truth`, when given, fills the NMSE column of the trace.
pub fn solve(
    a: &RealMatrix,
    y: &DVector<f64>,
    shape: GridShape,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
    truth: Option<&CsiVector>,
) -> Result<(CsiVector, SolverTrace)> {
    cfg.validate()?;
    if shape.len() != a.ncols() {
        return Err(Error::shape(format!(
            "grid {}x{} holds {} values, projection has {} columns",
            shape.rows,
            shape.cols,
            shape.len(),
            a.ncols()
        )));
    }
    if let Some(t) = truth {
        if t.len() != a.ncols() {
            return Err(Error::shape(format!("truth has {} values", t.len())));
        }
    }
    let score = |v: &DVector<f64>| -> Result<Option<f64>> {
        truth.map(|t| nmse_real(v.as_slice(), t.values().as_slice())).transpose()
    };

    let init = init_support_ls(a, y, cfg.sparsity_for(a.nrows()))?;
    let mut trace = SolverTrace {
        records: Vec::with_capacity(cfg.max_iters),
        init_residual: (y - a * &init.values).norm(),
        init_nmse: score(&init.values)?,
        ridge_fallback: init.ridge_fallback,
    };

    let mut h = init.values;
    let mut z = h.clone();
    let mut rho = cfg.rho0;
    for iter in 1..=cfg.max_iters {
        z = z_update(a, y, &h, rho, cfg.z_path)?;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        let sigma = NoiseLevel::from_penalty(cfg.lambda, rho)?;
        let next = denoiser.denoise(&CsiVector::new(shape, z.clone())?, sigma)?.into_values();
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        let reported = match cfg.estimate {
            Estimate::Z => &z,
            Estimate::H => &next,
        };
        trace.records.push(TraceRecord {
            iter,
            rho,
            sigma: sigma.sigma(),
            residual: (y - a * &z).norm(),
            nmse: score(reported)?,
        });
        let change = (&next - &h).norm();
        let base = h.norm();
        h = next;
        if cfg.tol > 0.0 && (change == 0.0 || (base > 0.0 && change / base < cfg.tol)) {
            break;
        }
        rho *= cfg.alpha;
    }
    let out = match cfg.estimate {
        Estimate::Z => z,
        Estimate::H => h,
    };
    Ok((CsiVector::new(shape, out)?, trace))
}
