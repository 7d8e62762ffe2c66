//! Shared random-draw helpers for the sampler blocks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Inverse-gamma draw with the shape/rate convention:
/// `X ~ IG(a, b)` iff `1/X ~ Gamma(shape = a, rate = b)`.
pub(crate) fn inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::invalid_input(format!(
            "inverse-gamma needs positive shape/rate, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::invalid_input(format!("inverse-gamma parameters: {e}")))?;
    // Guard against underflow to zero in the gamma variate.
    for _ in 0..64 {
        let v = g.sample(rng);
        if v > 0.0 && v.is_finite() {
            return Ok(1.0 / v);
        }
    }
    Err(Error::InvalidState("gamma sampler kept underflowing".into()))
}

pub(crate) fn std_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draw from `N(A⁻¹ b, A⁻¹)` given the precision `A` (consumed) via its
/// Cholesky factor: solve for the mean, then add `L⁻ᵀ z`.
pub(crate) fn gaussian_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    b: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
    let chol = Cholesky::new(precision)
        .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;
    let mean = chol.solve(b);
    let z = std_normal_vector(rng, b.len());
    // x = μ + L⁻ᵀ z has covariance (L Lᵀ)⁻¹ = A⁻¹.
    let fluct = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;
    Ok((mean + fluct, chol))
}
