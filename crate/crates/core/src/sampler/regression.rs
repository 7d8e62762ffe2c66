use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;

use super::draws::{gaussian_from_precision, inverse_gamma};
use super::prior::PriorConfig;
use super::state::{ModelState, Workspace};

/// Conjugate joint update of `(α, β)` from the Gaussian full conditional of
/// the linear model on the latent-adjusted residual, followed by the
/// inverse-gamma update of `σ²`.
pub fn update_regression_block<R: Rng + ?Sized>(
    state: &mut ModelState,
    ws: &Workspace,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    let n_dyads = ws.n_dyads();
    let p = ws.n_covariates();

    // Residual with every latent mean component removed.
    let r = &ws.y - state.factor_contribution(ws) - &ws.mu_map * &state.gamma;

    let mut precision = &ws.xtx / state.sigma2;
    precision[(0, 0)] += 1.0 / prior.var_alpha;
    for c in 1..=p {
        precision[(c, c)] += 1.0 / prior.var_beta;
    }
    let mut b = DVector::zeros(p + 1);
    b[0] = r.sum();
    b.rows_mut(1, p).copy_from(&(ws.z.transpose() * &r));
    b /= state.sigma2;

    let (theta, _) = gaussian_from_precision(precision, &b, rng)?;
    state.alpha = theta[0];
    state.beta = theta.rows(1, p).into_owned();

    let mut fit = &ws.z * &state.beta;
    fit.add_scalar_mut(state.alpha);
    let sse = (&r - fit).norm_squared();
    state.sigma2 = inverse_gamma(
        rng,
        prior.ig_shape_sigma2 + n_dyads as f64 / 2.0,
        prior.ig_rate_sigma2 + sse / 2.0,
    )?;
    Ok(())
}

/// Analytic full-conditional moments of `(α, β)` for a fixed `σ²`; used as
/// the oracle in tests and exposed for diagnostics.
pub fn regression_conditional_moments(
    state: &ModelState,
    ws: &Workspace,
    prior: &PriorConfig,
) -> (DVector<f64>, DMatrix<f64>) {
    let p = ws.n_covariates();
    let r = &ws.y - state.factor_contribution(ws) - &ws.mu_map * &state.gamma;
    let mut precision = &ws.xtx / state.sigma2;
    precision[(0, 0)] += 1.0 / prior.var_alpha;
    for c in 1..=p {
        precision[(c, c)] += 1.0 / prior.var_beta;
    }
    let mut b = DVector::zeros(p + 1);
    b[0] = r.sum();
    b.rows_mut(1, p).copy_from(&(ws.z.transpose() * &r));
    b /= state.sigma2;
    let cov = precision.try_inverse().expect("regression precision is invertible");
    ((&cov * b), cov)
}
