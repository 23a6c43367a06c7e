//! Per-sample work: domain preparation, reconstruction and scoring.

use csi_ppp_core::denoisers::Denoiser;
use csi_ppp_core::linalg::{ComplexMatrix, RealMatrix};
use csi_ppp_core::metrics::{score_sample, SampleMetrics, REPORT_SNRS_DB};
use csi_ppp_core::solver::{init_support_ls, omp_baseline, solve, SolverConfig, SolverTrace};
use csi_ppp_core::transform::{prepare, vectorize, zero_pad_delay, AngularDelayTransform, ChannelSample, CsiVector, TruncatedChannel};
use csi_ppp_core::Result;
use nalgebra::DVector;

use crate::config::{Baseline, NmseDomain};

/// A sample in every form evaluation needs.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub spatial_freq: ComplexMatrix,
    pub full_angular_delay: ComplexMatrix,
    pub truncated: TruncatedChannel,
    /// Solver-domain truth: the normalized truncated channel as a vector.
    pub vector: CsiVector,
}

pub fn prepare_samples(samples: &[ChannelSample], nd: usize) -> Result<Vec<PreparedSample>> {
    let Some(first) = samples.first() else {
        return Ok(vec![]);
    };
    let transform = AngularDelayTransform::new(first.subcarriers(), first.antennas())?;
    samples
        .iter()
        .map(|s| {
            let truncated = prepare(s, nd, &transform)?;
            Ok(PreparedSample {
                spatial_freq: s.spatial_freq.clone(),
                full_angular_delay: transform.to_angular_delay(&s.spatial_freq)?,
                vector: vectorize(&truncated),
                truncated,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ppp,
    Baseline(Baseline),
}

pub struct Reconstruction {
    pub estimate: CsiVector,
    pub trace: Option<SolverTrace>,
    pub ridge_fallback: bool,
}

pub struct MethodContext<'a> {
    pub solver: &'a SolverConfig,
    pub denoiser: &'a dyn Denoiser,
    pub omp_sparsity: usize,
}

pub fn reconstruct(
    method: Method,
    a: &RealMatrix,
    y: &DVector<f64>,
    truth: &CsiVector,
    ctx: &MethodContext<'_>,
) -> Result<Reconstruction> {
    let shape = truth.shape();
    match method {
        Method::Ppp => {
            let (estimate, trace) = solve(a, y, shape, ctx.solver, ctx.denoiser, Some(truth))?;
            let ridge_fallback = trace.ridge_fallback;
            Ok(Reconstruction { estimate, trace: Some(trace), ridge_fallback })
        }
        Method::Baseline(b) => {
            let est = match b {
                Baseline::Omp => omp_baseline(a, y, ctx.omp_sparsity)?,
                Baseline::LsInit => init_support_ls(a, y, ctx.solver.sparsity_for(a.nrows()))?,
            };
            Ok(Reconstruction {
                estimate: CsiVector::new(shape, est.values)?,
                trace: None,
                ridge_fallback: est.ridge_fallback,
            })
        }
    }
}

/// Scores a normalized-domain estimate. The true normalization scale is
/// used to return to the channel's own units.
pub fn score(sample: &PreparedSample, estimate: &CsiVector, domain: NmseDomain) -> Result<SampleMetrics> {
    let est_truncated = estimate.to_matrix();
    let scale = sample.truncated.scale;
    let est_full = zero_pad_delay(&est_truncated.map(|z| z * scale), sample.full_angular_delay.nrows())?;
    let transform = AngularDelayTransform::new(est_full.nrows(), est_full.ncols())?;
    let est_sf = transform.to_spatial_freq(&est_full)?;
    let nmse_pair = match domain {
        NmseDomain::Truncated => (&est_truncated, &sample.truncated.angular_delay),
        NmseDomain::Full => (&est_full, &sample.full_angular_delay),
    };
    score_sample(nmse_pair, &est_sf, &sample.spatial_freq, &REPORT_SNRS_DB)
}
