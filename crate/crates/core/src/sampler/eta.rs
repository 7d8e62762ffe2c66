use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::covariance::{cholesky_psd, node_correlation_matrix, KernelSpec};
use crate::error::Result;

use super::draws::{gaussian_from_precision, inverse_gamma};
use super::prior::PriorConfig;
use super::slice::slice_sample_log_range;
use super::state::{ModelState, Workspace};

/// Node correlation restricted to the U-subspace: `B = U' R_η(φ) U`.
fn subspace_correlation(ws: &Workspace, prior: &PriorConfig, phi: f64) -> Result<DMatrix<f64>> {
    let spec = KernelSpec::new(prior.eta_kernel, phi)?;
    let r = node_correlation_matrix(&ws.coords, &spec)?;
    Ok(ws.u.transpose() * r * &ws.u)
}

/// Analytic full-conditional moments of γ for the current state; the draw in
/// [`update_eta_block`] and the test oracle both come from here.
pub fn gamma_conditional_moments(
    state: &ModelState,
    ws: &Workspace,
    prior: &PriorConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = ws.n_nodes() as f64;
    let b = subspace_correlation(ws, prior, state.phi_eta)?;
    let b_chol = cholesky_psd(&b, 1e-10)?;
    let b_inv = b_chol.solve_mat(&DMatrix::identity(b.nrows(), b.nrows()));

    // (MU)'(MU) = n I because M'M = nI - 11' and U'1 = 0.
    let mut precision = b_inv / state.sigma2_eta;
    for k in 0..precision.nrows() {
        precision[(k, k)] += n / state.sigma2;
    }

    let mut r = &ws.y - state.factor_contribution(ws) - &ws.z * &state.beta;
    r.add_scalar_mut(-state.alpha);
    let rhs = (ws.mu_map.transpose() * r) / state.sigma2;

    let cov = precision.try_inverse().expect("gamma precision is invertible");
    Ok(((&cov * rhs), cov))
}

/// Gibbs update of the node-level spatial block: γ from its Gaussian full
/// conditional in the U-subspace, σ²_η from its inverse-gamma conditional,
/// and φ_η by slice sampling on the log range.
pub fn update_eta_block<R: Rng + ?Sized>(
    state: &mut ModelState,
    ws: &Workspace,
    prior: &PriorConfig,
    stepout_budget: usize,
    rng: &mut R,
) -> Result<()> {
    let n = ws.n_nodes() as f64;
    let dim = ws.n_nodes() - 1;

    let b = subspace_correlation(ws, prior, state.phi_eta)?;
    let b_chol = cholesky_psd(&b, 1e-10)?;
    let b_inv = b_chol.solve_mat(&DMatrix::identity(dim, dim));

    let mut precision = &b_inv / state.sigma2_eta;
    for k in 0..dim {
        precision[(k, k)] += n / state.sigma2;
    }
    let mut r = &ws.y - state.factor_contribution(ws) - &ws.z * &state.beta;
    r.add_scalar_mut(-state.alpha);
    let rhs = (ws.mu_map.transpose() * r) / state.sigma2;

    let (gamma, _) = gaussian_from_precision(precision, &rhs, rng)?;
    state.gamma = gamma;
    state.eta = &ws.u * &state.gamma;

    let quad = state.gamma.dot(&(&b_inv * &state.gamma));
    state.sigma2_eta = inverse_gamma(
        rng,
        prior.ig_shape_eta + dim as f64 / 2.0,
        prior.ig_rate_eta + quad / 2.0,
    )?;

    // Slice update on log φ_η given γ and σ²_η.
    let gamma_snapshot = state.gamma.clone();
    let sigma2_eta = state.sigma2_eta;
    let mut target = |logphi: f64| -> f64 {
        let b = match subspace_correlation(ws, prior, logphi.exp()) {
            Ok(b) => b,
            Err(_) => return f64::NEG_INFINITY,
        };
        let chol = match cholesky_psd(&b, 1e-10) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        let quad = gamma_snapshot.dot(&chol.solve_vec(&gamma_snapshot));
        -0.5 * (chol.logdet() + quad / sigma2_eta) + prior.logphi_prior(logphi)
    };
    let new_logphi = slice_sample_log_range(
        state.phi_eta.ln(),
        &mut target,
        prior.logphi_bounds,
        prior.slice_w0,
        stepout_budget,
        rng,
    )?;
    state.phi_eta = new_logphi.exp();
    Ok(())
}
