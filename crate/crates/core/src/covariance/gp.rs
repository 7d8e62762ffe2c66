use nalgebra::DVector;

use crate::error::{Error, Result};

use super::chol::cholesky_psd;
use super::kernel::{node_correlation_matrix, KernelSpec};

/// Conditional mean of a zero-mean Gaussian process at new locations given
/// observed values: `K_*o (K_oo + jI)⁻¹ y`. The marginal variance is the
/// kernel's unit variance; callers scale as needed.
pub fn gp_conditional(
    obs_coords: &[[f64; 2]],
    obs_values: &DVector<f64>,
    new_coords: &[[f64; 2]],
    spec: &KernelSpec,
) -> Result<DVector<f64>> {
    if obs_coords.len() != obs_values.len() {
        return Err(Error::invalid_input(format!(
            "{} observed coordinates but {} values",
            obs_coords.len(),
            obs_values.len()
        )));
    }
    if obs_coords.is_empty() {
        return Err(Error::invalid_input("conditioning set is empty"));
    }
    let k_oo = node_correlation_matrix(obs_coords, spec)?;
    let chol = cholesky_psd(&k_oo, 1e-10)?;
    let alpha = chol.solve_vec(obs_values);

    let mut out = DVector::zeros(new_coords.len());
    for (r, nc) in new_coords.iter().enumerate() {
        let mut acc = 0.0;
        for (c, oc) in obs_coords.iter().enumerate() {
            let d = crate::dyad::euclidean(nc, oc);
            acc += spec.eval(d) * alpha[c];
        }
        out[r] = acc;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interpolates_at_observed_points() {
        let coords = [[0.0, 0.0], [0.5, 0.2], [0.8, 0.9], [0.2, 0.7]];
        let y = DVector::from_row_slice(&[1.0, -0.5, 2.0, 0.3]);
        let spec = KernelSpec::matern32(0.4).unwrap();
        let pred = gp_conditional(&coords, &y, &coords, &spec).unwrap();
        assert_relative_eq!(pred, y, epsilon = 1e-6);
    }

    #[test]
    fn far_field_reverts_to_zero_mean() {
        let coords = [[0.0, 0.0], [0.1, 0.0]];
        let y = DVector::from_row_slice(&[3.0, 3.0]);
        let spec = KernelSpec::matern32(0.05).unwrap();
        let pred = gp_conditional(&coords, &y, &[[50.0, 50.0]], &spec).unwrap();
        assert!(pred[0].abs() < 1e-10);
    }

    #[test]
    fn single_observation_scales_by_correlation() {
        let spec = KernelSpec::exponential(1.0).unwrap();
        let y = DVector::from_row_slice(&[2.0]);
        let pred = gp_conditional(&[[0.0, 0.0]], &y, &[[1.0, 0.0]], &spec).unwrap();
        assert_relative_eq!(pred[0], 2.0 * (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_length_mismatch() {
        let spec = KernelSpec::matern32(1.0).unwrap();
        let y = DVector::from_row_slice(&[1.0, 2.0]);
        assert!(gp_conditional(&[[0.0, 0.0]], &y, &[[1.0, 1.0]], &spec).is_err());
    }
}
