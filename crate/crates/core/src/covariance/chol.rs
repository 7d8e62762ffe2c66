use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Result of a jittered Cholesky factorization.
#[derive(Debug, Clone)]
pub struct CholPsd {
    /// Lower-triangular factor with `L Lᵀ = S + jitter · I`.
    pub l: DMatrix<f64>,
    /// The jitter actually added to the diagonal (0 when none was needed).
    pub jitter: f64,
}

impl CholPsd {
    /// Solves `(S + jI) x = b`.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.l.solve_lower_triangular(b).expect("factor is nonsingular");
        self.l.tr_solve_lower_triangular(&y).expect("factor is nonsingular")
    }

    /// Solves `(S + jI) X = B` columnwise.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self.l.solve_lower_triangular(b).expect("factor is nonsingular");
        self.l.tr_solve_lower_triangular(&y).expect("factor is nonsingular")
    }

    /// `log det (S + jI)` from the factor diagonal.
    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Plain lower Cholesky via faer; `None` when the matrix is not positive
/// definite. faer is used for speed: the sampler factorizes dyad-sized
/// matrices in its inner loop.
pub fn chol_lower(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    let m = faer::Mat::from_fn(n, n, |i, j| s[(i, j)]);
    match m.llt(faer::Side::Lower) {
        Ok(f) => {
            let l = f.L();
            let mut out = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in j..n {
                    out[(i, j)] = l[(i, j)];
                }
            }
            Some(out)
        }
        Err(_) => None,
    }
}

/// Cholesky with an escalating jitter ladder: tries `j = 0`, then
/// `jitter_start · mean_diag · 10^k` for `k = 0..=6`, and reports the jitter
/// used. `jitter_start` is relative to the mean diagonal of `S`.
pub fn cholesky_psd(s: &DMatrix<f64>, jitter_start: f64) -> Result<CholPsd> {
    if s.nrows() != s.ncols() {
        return Err(Error::invalid_input("cholesky_psd needs a square matrix"));
    }
    let n = s.nrows();
    let mean_diag = s.diagonal().sum() / n as f64;
    let base = jitter_start * mean_diag.abs().max(f64::MIN_POSITIVE);

    if let Some(l) = chol_lower(s) {
        return Ok(CholPsd { l, jitter: 0.0 });
    }
    for k in 0..=6 {
        let j = base * 10f64.powi(k);
        let mut sj = s.clone();
        for i in 0..n {
            sj[(i, i)] += j;
        }
        if let Some(l) = chol_lower(&sj) {
            return Ok(CholPsd { l, jitter: j });
        }
    }
    let min_pivot = s.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
    Err(Error::NotPositiveDefinite { min_pivot })
}
