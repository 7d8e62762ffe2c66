//! Bayesian dyadic flow modelling: node-pair responses regressed on
//! environmental differences and connectivity scores, with spatially varying
//! coefficients driven by low-rank dyadic Gaussian processes.

pub mod covariance;
pub mod design;
pub mod dyad;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod mapping;
pub mod sampler;
pub mod simulator;

pub use error::{Error, Result};
