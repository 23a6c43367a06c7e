//! One-sided CSI feedback: seeded linear projection and quantization at the
//! user equipment, plug-and-play-priors reconstruction at the base station.
//!
//! The pipeline is
//!
//! 1. [`transform`]: spatial-frequency channel to truncated, normalized
//!    angular-delay matrix, then to a real vector.
//! 2. [`encoder`]: row-orthonormal projection regenerated from a seed,
//!    optional mu-law quantization of the feedback.
//! 3. [`solver`]: support-restricted least-squares initialization followed by
//!    half-quadratic splitting with a pluggable [`denoisers::Denoiser`].
//! 4. [`metrics`]: NMSE, cosine similarity and matched-filter rate.

pub mod denoisers;
pub mod encoder;
mod error;
pub mod linalg;
pub mod metrics;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
