//! Experiment harness: CSID1 datasets, synthetic channels, CR x bit-depth
//! sweeps, reports and figures.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod inspect;
pub mod pipeline;
pub mod plot;
pub mod synthetic;

pub use error::{HarnessError, Result};
