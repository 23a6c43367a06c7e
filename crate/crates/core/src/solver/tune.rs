use nalgebra::DVector;

use super::{solve, SolverConfig};
use crate::denoisers::Denoiser;
use crate::linalg::RealMatrix;
use crate::metrics::to_db;
use crate::transform::{CsiVector, GridShape};
use crate::{Error, Result};

/// Candidate values, searched as a cartesian product with `lambda` varying
/// slowest and `alpha` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TuneGrid {
    pub lambdas: Vec<f64>,
    pub rho0s: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl TuneGrid {
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.lambdas.len() * self.rho0s.len() * self.alphas.len());
        for &l in &self.lambdas {
            for &r in &self.rho0s {
                for &a in &self.alphas {
                    out.push((l, r, a));
                }
            }
        }
        out
    }
}

/// One tuning sample: feedback and the vector it came from.
#[derive(Clone, Debug)]
pub struct TuneInstance {
    pub y: DVector<f64>,
    pub truth: CsiVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneRow {
    pub lambda: f64,
    pub rho0: f64,
    pub alpha: f64,
    /// Mean linear NMSE; infinite if any sample failed.
    pub mean_nmse: f64,
    pub failures: usize,
}

impl TuneRow {
    pub fn mean_nmse_db(&self) -> f64 {
        to_db(self.mean_nmse)
    }
}

#[derive(Clone, Debug)]
pub struct TuneOutcome {
    pub best: SolverConfig,
    pub best_index: usize,
    pub report: Vec<TuneRow>,
}

impl TuneOutcome {
    pub fn report_table(&self) -> String {
        let mut out = String::from("lambda,rho0,alpha,mean_nmse_db,failures,selected\n");
        for (i, r) in self.report.iter().enumerate() {
            out.push_str(&format!(
                "{:e},{:e},{},{},{},{}\n",
                r.lambda,
                r.rho0,
                r.alpha,
                r.mean_nmse_db(),
                r.failures,
                u8::from(i == self.best_index)
            ));
        }
        out
    }
}

/// Grid search for the schedule minimizing mean NMSE. The first grid point
/// wins ties. Other fields are taken from `template`.
pub fn tune(
    instances: &[TuneInstance],
    a: &RealMatrix,
    shape: GridShape,
    grid: &TuneGrid,
    template: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<TuneOutcome> {
    if instances.is_empty() {
        return Err(Error::invalid("tuning needs at least one sample"));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("tuning grid is empty"));
    }
    let mut report = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, &(lambda, rho0, alpha)) in points.iter().enumerate() {
        let cfg = SolverConfig { lambda, rho0, alpha, ..template.clone() };
        cfg.validate()?;
        let mut total = 0.0;
        let mut failures = 0;
        for inst in instances {
            match solve(a, &inst.y, shape, &cfg, denoiser, Some(&inst.truth)) {
                Ok((est, _)) => total += crate::metrics::nmse_real(est.values().as_slice(), inst.truth.values().as_slice())?,
                Err(Error::Divergence { .. }) => failures += 1,
                Err(e) => return Err(e),
            }
        }
        let mean = if failures > 0 { f64::INFINITY } else { total / instances.len() as f64 };
        if best.is_none_or(|(_, b)| mean < b) {
            best = Some((idx, mean));
        }
        report.push(TuneRow { lambda, rho0, alpha, mean_nmse: mean, failures });
    }
    let (best_index, _) = best.expect("grid nonempty");
    let (lambda, rho0, alpha) = points[best_index];
    Ok(TuneOutcome {
        best: SolverConfig { lambda, rho0, alpha, ..template.clone() },
        best_index,
        report,
    })
}
