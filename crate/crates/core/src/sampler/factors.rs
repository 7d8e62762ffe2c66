use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{chol_lower, cholesky_psd, node_correlation_matrix, DyadicGp, KernelSpec};
use crate::error::{Error, Result};

use super::draws::std_normal_vector;
use super::prior::PriorConfig;
use super::slice::slice_sample_log_range;
use super::state::{ModelState, Workspace};

/// Thresholds below which a factor is treated as negligible and the
/// expensive joint move is skipped.
const C_NORM_MIN: f64 = 1e-6;
const S_VAR_MIN: f64 = 1e-10;

/// Per-factor sampler diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct FactorStats {
    pub joint_attempts: u64,
    pub joint_accepts: u64,
    pub jitter_events: u64,
}

impl FactorStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.joint_attempts == 0 {
            0.0
        } else {
            self.joint_accepts as f64 / self.joint_attempts as f64
        }
    }
}

/// Options controlling one factor update.
#[derive(Debug, Clone, Copy)]
pub struct FactorUpdateOpts {
    /// Attempt the whitened joint `(φ_q, w_q)` move this sweep.
    pub attempt_joint: bool,
    /// Slice step-out budget for the standalone φ_q update.
    pub stepout_budget: usize,
}

fn factor_gp(ws: &Workspace, prior: &PriorConfig, phi: f64) -> Result<DyadicGp> {
    let spec = KernelSpec::new(prior.factor_kernel, phi)?;
    DyadicGp::new(node_correlation_matrix(&ws.coords, &spec)?)
}

fn partial_residual(state: &ModelState, ws: &Workspace, q: usize) -> DVector<f64> {
    let mut r = &ws.y - &ws.z * &state.beta - &ws.mu_map * &state.gamma;
    r.add_scalar_mut(-state.alpha);
    for q2 in 0..state.w.ncols() {
        if q2 == q {
            continue;
        }
        let s = state.factor_scale(ws, q2);
        for k in 0..r.len() {
            r[k] -= s[k] * state.w[(k, q2)];
        }
    }
    r
}

fn gaussian_sse(r: &DVector<f64>, s: &DVector<f64>, w: nalgebra::DVectorView<f64>) -> f64 {
    let mut sse = 0.0;
    for k in 0..r.len() {
        let e = r[k] - s[k] * w[k];
        sse += e * e;
    }
    sse
}

/// One update of the qth latent dyadic spatial factor: an optional whitened
/// joint Metropolis move on `(φ_q, w_q)`, a standalone slice update of
/// `φ_q | w_q`, and the exact conditional Gaussian draw of `w_q | φ_q`.
pub fn update_factor_block<R: Rng + ?Sized>(
    state: &mut ModelState,
    ws: &Workspace,
    prior: &PriorConfig,
    q: usize,
    opts: FactorUpdateOpts,
    stats: &mut FactorStats,
    rng: &mut R,
) -> Result<()> {
    if q >= state.w.ncols() {
        return Err(Error::invalid_input(format!("factor index {q} out of range")));
    }
    let n_dyads = ws.n_dyads();
    let s = state.factor_scale(ws, q);
    let r = partial_residual(state, ws, q);
    let c_norm = state.c_load.column(q).norm();
    let s_mean = s.mean();
    let s_var = s.iter().map(|v| (v - s_mean).powi(2)).sum::<f64>() / (n_dyads as f64 - 1.0).max(1.0);

    // (a) Whitened joint random-walk move on (φ_q, w_q). The whitening makes
    // the factor prior cancel from the Metropolis ratio, leaving the
    // likelihood and the log-range prior.
    if opts.attempt_joint && c_norm > C_NORM_MIN && s_var > S_VAR_MIN {
        stats.joint_attempts += 1;
        let gp = factor_gp(ws, prior, state.phi_q[q])?;
        if gp.jitter() > 0.0 {
            stats.jitter_events += 1;
        }
        let l_cur = chol_lower(&gp.dense(&ws.idx)?)
            .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;
        let w_cur = state.w.column(q).into_owned();
        let v = l_cur
            .solve_lower_triangular(&w_cur)
            .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;

        // Propose log φ*, resampling until it lands inside the bounds.
        let rw_sd = prior.rw_sd();
        let logphi_cur = state.phi_q[q].ln();
        let mut logphi_new = f64::NAN;
        for _ in 0..1000 {
            let cand = logphi_cur + rw_sd * rng.sample::<f64, _>(StandardNormal);
            if cand >= prior.logphi_bounds.0 && cand <= prior.logphi_bounds.1 {
                logphi_new = cand;
                break;
            }
        }
        if logphi_new.is_finite() {
            let gp_new = factor_gp(ws, prior, logphi_new.exp())?;
            if gp_new.jitter() > 0.0 {
                stats.jitter_events += 1;
            }
            let l_new = chol_lower(&gp_new.dense(&ws.idx)?)
                .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;
            let w_new = &l_new * &v;

            let sse_cur = gaussian_sse(&r, &s, w_cur.as_view());
            let sse_new = gaussian_sse(&r, &s, w_new.as_view());
            let log_ratio = (sse_cur - sse_new) / (2.0 * state.sigma2)
                + prior.logphi_prior(logphi_new)
                - prior.logphi_prior(logphi_cur);
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                stats.joint_accepts += 1;
                state.phi_q[q] = logphi_new.exp();
                state.w.set_column(q, &w_new);
            }
        }
    }

    // (b) Standalone slice update of φ_q given w_q.
    let w_snapshot = state.w.column(q).into_owned();
    let mut target = |logphi: f64| -> f64 {
        let gp = match factor_gp(ws, prior, logphi.exp()) {
            Ok(g) => g,
            Err(_) => return f64::NEG_INFINITY,
        };
        match gp.log_density(&w_snapshot, &ws.idx) {
            Ok(d) => d + prior.logphi_prior(logphi),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let new_logphi = slice_sample_log_range(
        state.phi_q[q].ln(),
        &mut target,
        prior.logphi_bounds,
        prior.slice_w0,
        opts.stepout_budget,
        rng,
    )?;
    state.phi_q[q] = new_logphi.exp();

    // (c) Exact conditional draw of w_q via a precision Cholesky solve:
    // precision = Σ_q(φ_q)⁻¹ + diag(s²)/σ².
    let gp = factor_gp(ws, prior, state.phi_q[q])?;
    if gp.jitter() > 0.0 {
        stats.jitter_events += 1;
    }
    let mut precision = gp.dense_inverse(&ws.idx)?;
    for k in 0..n_dyads {
        precision[(k, k)] += s[k] * s[k] / state.sigma2;
    }
    let chol = cholesky_psd(&precision, 1e-10)?;
    if chol.jitter > 0.0 {
        stats.jitter_events += 1;
    }
    let b = DVector::from_fn(n_dyads, |k, _| s[k] * r[k] / state.sigma2);
    let mean = chol.solve_vec(&b);
    let z = std_normal_vector(rng, n_dyads);
    let fluct = chol
        .l
        .tr_solve_lower_triangular(&z)
        .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?;
    state.w.set_column(q, &(mean + fluct));
    Ok(())
}
