use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;

use super::draws::{gaussian_from_precision, inverse_gamma};
use super::prior::PriorConfig;
use super::state::{ModelState, Workspace};

/// Floor applied to the shrinkage scales to avoid numerical underflow.
const SCALE_FLOOR: f64 = 1e-12;

/// Gibbs update of the loading matrix and its global-local shrinkage scales:
/// each column `c_q` from its conjugate Gaussian full conditional, then the
/// half-Cauchy scales via the inverse-gamma augmentation
/// (`λ² | ν ~ IG`, `ν | λ² ~ IG`, and likewise for `ξ` with its latent).
pub fn update_loadings_block<R: Rng + ?Sized>(
    state: &mut ModelState,
    ws: &Workspace,
    _prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    let n_dyads = ws.n_dyads();
    let p = ws.n_covariates();
    let q_count = state.w.ncols();

    for q in 0..q_count {
        // Residual without the qth column's contribution.
        let mut r = &ws.y - &ws.z * &state.beta - &ws.mu_map * &state.gamma;
        r.add_scalar_mut(-state.alpha);
        for q2 in 0..q_count {
            if q2 == q {
                continue;
            }
            let s = state.factor_scale(ws, q2);
            for k in 0..n_dyads {
                r[k] -= s[k] * state.w[(k, q2)];
            }
        }

        // Design for c_q: X_q = diag(w_q) Z.
        let mut xq = ws.z.clone();
        for k in 0..n_dyads {
            let w = state.w[(k, q)];
            for c in 0..p {
                xq[(k, c)] *= w;
            }
        }
        let mut precision = (xq.transpose() * &xq) / state.sigma2;
        for l in 0..p {
            let scale2 = (state.lambda[(l, q)] * state.xi[q]).powi(2).max(SCALE_FLOOR * SCALE_FLOOR);
            precision[(l, l)] += 1.0 / scale2;
        }
        let b = (xq.transpose() * &r) / state.sigma2;
        let (cq, _) = gaussian_from_precision(precision, &b, rng)?;
        state.c_load.set_column(q, &cq);

        // Local scales and their augmentation latents.
        for l in 0..p {
            let c2 = state.c_load[(l, q)].powi(2);
            let xi2 = state.xi[q].powi(2).max(SCALE_FLOOR * SCALE_FLOOR);
            let lambda2 = inverse_gamma(rng, 1.0, 1.0 / state.nu[(l, q)] + c2 / (2.0 * xi2))?;
            state.lambda[(l, q)] = lambda2.sqrt().max(SCALE_FLOOR);
            state.nu[(l, q)] = inverse_gamma(rng, 1.0, 1.0 + 1.0 / lambda2.max(SCALE_FLOOR))?;
        }

        // Global scale and its latent.
        let mut rate = 1.0 / state.zeta[q];
        for l in 0..p {
            let lambda2 = state.lambda[(l, q)].powi(2).max(SCALE_FLOOR * SCALE_FLOOR);
            rate += state.c_load[(l, q)].powi(2) / (2.0 * lambda2);
        }
        let xi2 = inverse_gamma(rng, (p as f64 + 1.0) / 2.0, rate)?;
        state.xi[q] = xi2.sqrt().max(SCALE_FLOOR);
        state.zeta[q] = inverse_gamma(rng, 1.0, 1.0 + 1.0 / xi2.max(SCALE_FLOOR))?;
    }
    Ok(())
}

/// Analytic full-conditional moments for one loading column given the rest
/// of the state; the test oracle for the Gaussian part of the block.
pub fn loading_conditional_moments(
    state: &ModelState,
    ws: &Workspace,
    q: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let n_dyads = ws.n_dyads();
    let p = ws.n_covariates();
    let mut r = &ws.y - &ws.z * &state.beta - &ws.mu_map * &state.gamma;
    r.add_scalar_mut(-state.alpha);
    for q2 in 0..state.w.ncols() {
        if q2 == q {
            continue;
        }
        let s = state.factor_scale(ws, q2);
        for k in 0..n_dyads {
            r[k] -= s[k] * state.w[(k, q2)];
        }
    }
    let mut xq = ws.z.clone();
    for k in 0..n_dyads {
        for c in 0..p {
            xq[(k, c)] *= state.w[(k, q)];
        }
    }
    let mut precision = (xq.transpose() * &xq) / state.sigma2;
    for l in 0..p {
        precision[(l, l)] += 1.0 / (state.lambda[(l, q)] * state.xi[q]).powi(2);
    }
    let cov = precision.try_inverse().expect("loading precision invertible");
    let mean = &cov * (xq.transpose() * r) / state.sigma2;
    (mean, cov)
}
