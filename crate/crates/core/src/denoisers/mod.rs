//! Denoisers that can be plugged into the reconstruction loop in place of a
//! proximal step.

mod cnn;
mod weights;

use std::fmt;

pub use cnn::{conv2d_same, denoise_cnn, Activation, CnnDenoiser, ConvLayer, DenoiserModel, KERNEL, MODEL_INPUT_CHANNELS, MODEL_OUTPUT_CHANNELS};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WeightsError, PPPW1_MAGIC};

use crate::transform::CsiVector;
use crate::{Error, Result};

/// Noise standard deviation in the normalized CSI domain.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise level must be finite and >= 0, got {sigma}")));
        }
        Ok(NoiseLevel(sigma))
    }

    /// `sqrt(lambda / (2 rho))`, the noise level the denoising subproblem
    /// implies for regularization weight `lambda` and penalty `rho`.
    pub fn from_penalty(lambda: f64, rho: f64) -> Result<Self> {
        if !(lambda > 0.0 && rho > 0.0) {
            return Err(Error::invalid(format!(
                "lambda and rho must be positive, got {lambda} and {rho}"
            )));
        }
        NoiseLevel::new((lambda / (2.0 * rho)).sqrt())
    }

    pub fn sigma(self) -> f64 {
        self.0
    }
}

pub trait Denoiser: Send + Sync + fmt::Debug {
    /// Short label used in reports.
    fn name(&self) -> String;

    fn denoise(&self, z: &CsiVector, sigma: NoiseLevel) -> Result<CsiVector>;
}

/// Passes the input through; turns the loop into plain penalized least squares.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn name(&self) -> String {
        "identity".into()
    }

    fn denoise(&self, z: &CsiVector, _sigma: NoiseLevel) -> Result<CsiVector> {
        Ok(z.clone())
    }
}

/// Elementwise soft thresholding at `tau = gain * sigma`.
#[derive(Clone, Copy, Debug)]
pub struct SoftThresholdDenoiser {
    gain: f64,
}

impl SoftThresholdDenoiser {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::invalid(format!("gain must be positive, got {gain}")));
        }
        Ok(SoftThresholdDenoiser { gain })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

impl Denoiser for SoftThresholdDenoiser {
    fn name(&self) -> String {
        "soft".into()
    }

    fn denoise(&self, z: &CsiVector, sigma: NoiseLevel) -> Result<CsiVector> {
        Ok(denoise_soft_threshold(z, sigma, self.gain))
    }
}

#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn denoise_soft_threshold(z: &CsiVector, sigma: NoiseLevel, gain: f64) -> CsiVector {
    let tau = gain * sigma.sigma();
    let values = z.values().map(|x| soft_threshold(x, tau));
    CsiVector::new(z.shape(), values).expect("shape unchanged")
}
