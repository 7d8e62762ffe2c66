use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::KernelFamily;
use crate::error::{Error, Result};

/// Every fixed hyperparameter of the sampler: prior variances, inverse-gamma
/// shapes/rates, the informed log-range prior, factor count, and the slice /
/// random-walk tuning constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorConfig {
    pub var_alpha: f64,
    pub var_beta: f64,
    pub ig_shape_sigma2: f64,
    pub ig_rate_sigma2: f64,
    pub ig_shape_eta: f64,
    pub ig_rate_eta: f64,
    /// Mean of the log spatial-range prior (log median pairwise distance).
    pub mu_logphi: f64,
    pub var_logphi: f64,
    /// Latent factor count Q.
    pub q: usize,
    /// Initial slice bracket width.
    pub slice_w0: f64,
    /// Step-out budget after burn-in.
    pub slice_max_stepout: usize,
    /// Reduced step-out budget during early iterations.
    pub slice_burnin_stepout: usize,
    /// Iteration count over which the reduced budget applies.
    pub slice_burnin_iters: usize,
    /// Random-walk sd as a fraction of the log-range width.
    pub rw_frac: f64,
    /// Reflective bounds on log φ.
    pub logphi_bounds: (f64, f64),
    pub eta_kernel: KernelFamily,
    pub factor_kernel: KernelFamily,
}

impl PriorConfig {
    /// Informed defaults tied to the observed pairwise distances: the
    /// log-range prior is centered at the log median distance and the φ
    /// bounds are the distance range intersected with the μ ± 3σ window.
    pub fn from_distances(dist: &DMatrix<f64>, q: usize) -> Result<Self> {
        let n = dist.nrows();
        if n < 2 || dist.ncols() != n {
            return Err(Error::invalid_input("need a square distance matrix with n >= 2"));
        }
        let mut offdiag: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist[(i, j)];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::invalid_input("invalid pairwise distance"));
                }
                if d > 0.0 {
                    offdiag.push(d);
                }
            }
        }
        if offdiag.is_empty() {
            return Err(Error::invalid_input("all pairwise distances are zero"));
        }
        offdiag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = offdiag.len();
        let median = if m % 2 == 1 {
            offdiag[m / 2]
        } else {
            0.5 * (offdiag[m / 2 - 1] + offdiag[m / 2])
        };
        let mu_logphi = median.ln();
        let var_logphi = 2.25f64;
        let sd = var_logphi.sqrt();
        let lo = offdiag[0].ln().max(mu_logphi - 3.0 * sd);
        let hi = offdiag[m - 1].ln().min(mu_logphi + 3.0 * sd);
        if !(lo < hi) {
            return Err(Error::invalid_input("degenerate log-range bounds"));
        }
        if q == 0 {
            return Err(Error::invalid_input("factor count Q must be >= 1"));
        }
        Ok(Self {
            var_alpha: 1e6,
            var_beta: 1e6,
            ig_shape_sigma2: 0.01,
            ig_rate_sigma2: 0.01,
            ig_shape_eta: 0.01,
            ig_rate_eta: 0.01,
            mu_logphi,
            var_logphi,
            q,
            slice_w0: 0.5,
            slice_max_stepout: 50,
            slice_burnin_stepout: 10,
            slice_burnin_iters: 100,
            rw_frac: 0.15,
            logphi_bounds: (lo, hi),
            eta_kernel: KernelFamily::Exponential,
            factor_kernel: KernelFamily::Matern32,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            self.var_alpha,
            self.var_beta,
            self.ig_shape_sigma2,
            self.ig_rate_sigma2,
            self.ig_shape_eta,
            self.ig_rate_eta,
            self.var_logphi,
            self.slice_w0,
            self.rw_frac,
        ];
        if positives.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("prior variances, shapes, and rates must be positive".into()));
        }
        if self.q == 0 {
            return Err(Error::Config("factor count Q must be >= 1".into()));
        }
        if !(self.logphi_bounds.0 < self.logphi_bounds.1) {
            return Err(Error::Config("log-range bounds must satisfy min < max".into()));
        }
        Ok(())
    }

    /// Random-walk sd for log-range proposals.
    pub fn rw_sd(&self) -> f64 {
        self.rw_frac * (self.logphi_bounds.1 - self.logphi_bounds.0)
    }

    /// Log-density of the log-range prior, up to a constant.
    pub fn logphi_prior(&self, logphi: f64) -> f64 {
        -0.5 * (logphi - self.mu_logphi).powi(2) / self.var_logphi
    }

    /// The log-range prior mean clipped into the bounds.
    pub fn initial_phi(&self) -> f64 {
        self.mu_logphi.clamp(self.logphi_bounds.0, self.logphi_bounds.1).exp()
    }
}
