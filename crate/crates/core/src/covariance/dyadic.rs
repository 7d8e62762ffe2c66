use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dyad::DyadIndex;
use crate::error::{Error, Result};

use super::chol::{cholesky_psd, CholPsd};

/// Dense dyadic covariance over the ordered `i < j` dyads:
/// `Σ[(i,j),(i',j')] = K[i,i'] K[j,j'] + K[i,j'] K[j,i']`.
#[derive(Debug, Clone)]
pub struct DyadicCovariance {
    pub matrix: DMatrix<f64>,
    pub n_nodes: usize,
}

/// Assembles the dense dyadic covariance from a node correlation matrix in
/// the normative dyad order. `K` must be symmetric with unit diagonal.
pub fn dyadic_covariance(k: &DMatrix<f64>, idx: &DyadIndex) -> Result<DyadicCovariance> {
    validate_correlation(k, idx)?;
    Ok(DyadicCovariance {
        matrix: assemble_product_covariance(k, idx),
        n_nodes: idx.n_nodes(),
    })
}

fn validate_correlation(k: &DMatrix<f64>, idx: &DyadIndex) -> Result<()> {
    let n = idx.n_nodes();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::invalid_input(format!(
            "correlation matrix is {}x{}, index has {} nodes",
            k.nrows(),
            k.ncols(),
            n
        )));
    }
    for i in 0..n {
        if (k[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(Error::invalid_input("correlation matrix diagonal must be 1"));
        }
        for j in (i + 1)..n {
            if (k[(i, j)] - k[(j, i)]).abs() > 1e-10 {
                return Err(Error::invalid_input("correlation matrix must be symmetric"));
            }
        }
    }
    Ok(())
}

/// Entrywise product-covariance fill; symmetric halves mirrored.
fn assemble_product_covariance(k: &DMatrix<f64>, idx: &DyadIndex) -> DMatrix<f64> {
    let pairs = idx.pairs();
    let n_dyads = pairs.len();
    let mut s = DMatrix::zeros(n_dyads, n_dyads);
    for a in 0..n_dyads {
        let (i, j) = pairs[a];
        for b in a..n_dyads {
            let (ii, jj) = pairs[b];
            let v = k[(i, ii)] * k[(j, jj)] + k[(i, jj)] * k[(j, ii)];
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Gaussian process over dyads with the product covariance of a node
/// correlation matrix `K`, exploiting that Σ is the off-diagonal principal
/// block of the symmetrized node-node operator `S ↦ K S K`.
///
/// That structure gives `O(n³)` log-determinants, inverse applications, and
/// exact prior draws without ever factorizing the `N×N` matrix:
///
/// * `log det Σ = (n+1) log det K + log det (K⁻¹ ∘ K⁻¹)`
/// * `Σ⁻¹ y = upper(P (S_y − diag d) P)` with `(P∘P) d = diag(P S_y P)`,
///   `P = K⁻¹`, and `S_y` the symmetric zero-diagonal embedding of `y`
/// * a prior draw is `upper((L Z Lᵀ + L Zᵀ Lᵀ)/√2)` for iid normal `Z`
///
/// Each identity is validated against dense brute force in the test suite.
#[derive(Debug, Clone)]
pub struct DyadicGp {
    n: usize,
    /// Node correlation (plus any jitter needed to factorize it).
    k: DMatrix<f64>,
    /// Lower Cholesky factor of `k`.
    l_k: DMatrix<f64>,
    /// `K⁻¹`.
    p: DMatrix<f64>,
    /// Cholesky of the Hadamard square `P ∘ P`.
    m_chol: CholPsd,
    logdet_sigma: f64,
    jitter: f64,
}

impl DyadicGp {
    /// Builds the operator from a node correlation matrix. Applies the
    /// jitter ladder to `K` if it is numerically rank-deficient.
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n || n == 0 {
            return Err(Error::invalid_input("node correlation must be square"));
        }
        let k_chol = cholesky_psd(&k, 1e-10)?;
        let mut k = k;
        if k_chol.jitter > 0.0 {
            for i in 0..n {
                k[(i, i)] += k_chol.jitter;
            }
        }
        let p = k_chol.solve_mat(&DMatrix::identity(n, n));
        let m = p.component_mul(&p);
        let m_chol = cholesky_psd(&m, 1e-12)?;
        let logdet_k = k_chol.logdet();
        let logdet_sigma = (n as f64 + 1.0) * logdet_k + m_chol.logdet();
        Ok(Self {
            n,
            k,
            l_k: k_chol.l,
            p,
            m_chol,
            logdet_sigma,
            jitter: k_chol.jitter,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Jitter added to the node correlation, if any.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The (jittered) node correlation matrix backing this operator.
    pub fn node_correlation(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn logdet(&self) -> f64 {
        self.logdet_sigma
    }

    fn check(&self, idx: &DyadIndex, len: usize) -> Result<()> {
        if idx.n_nodes() != self.n || idx.len() != len {
            return Err(Error::invalid_input("dyad index does not match operator size"));
        }
        Ok(())
    }

    /// Embeds a dyad vector as a symmetric zero-diagonal node matrix.
    fn embed(&self, y: &DVector<f64>, idx: &DyadIndex) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n, self.n);
        for (row, &(i, j)) in idx.pairs().iter().enumerate() {
            s[(i, j)] = y[row];
            s[(j, i)] = y[row];
        }
        s
    }

    fn extract(&self, s: &DMatrix<f64>, idx: &DyadIndex) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.pairs().iter().map(|&(i, j)| s[(i, j)]))
    }

    /// `Σ y` in `O(n³)`.
    pub fn apply(&self, y: &DVector<f64>, idx: &DyadIndex) -> Result<DVector<f64>> {
        self.check(idx, y.len())?;
        let s = self.embed(y, idx);
        let out = &self.k * s * &self.k;
        Ok(self.extract(&out, idx))
    }

    /// `Σ⁻¹ y` in `O(n³)`.
    pub fn inv_apply(&self, y: &DVector<f64>, idx: &DyadIndex) -> Result<DVector<f64>> {
        self.check(idx, y.len())?;
        let s = self.embed(y, idx);
        let a = &self.p * &s * &self.p;
        let d = self.m_chol.solve_vec(&a.diagonal());
        let mut s_adj = s;
        for i in 0..self.n {
            s_adj[(i, i)] = -d[i];
        }
        let out = &self.p * s_adj * &self.p;
        Ok(self.extract(&out, idx))
    }

    /// Quadratic form `yᵀ Σ⁻¹ y`.
    pub fn quad_form(&self, y: &DVector<f64>, idx: &DyadIndex) -> Result<f64> {
        Ok(y.dot(&self.inv_apply(y, idx)?))
    }

    /// Gaussian log-density of `w` under `N(0, Σ)`.
    pub fn log_density(&self, w: &DVector<f64>, idx: &DyadIndex) -> Result<f64> {
        let n_dyads = idx.len() as f64;
        let quad = self.quad_form(w, idx)?;
        Ok(-0.5 * (n_dyads * (2.0 * std::f64::consts::PI).ln() + self.logdet_sigma + quad))
    }

    /// Exact draw from `N(0, Σ)` using `n²` standard normals.
    pub fn sample_prior<R: Rng + ?Sized>(&self, idx: &DyadIndex, rng: &mut R) -> Result<DVector<f64>> {
        self.check(idx, idx.len())?;
        let z = DMatrix::from_fn(self.n, self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = &self.l_k * z * self.l_k.transpose();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        Ok(DVector::from_iterator(
            idx.len(),
            idx.pairs()
                .iter()
                .map(|&(i, j)| (m[(i, j)] + m[(j, i)]) * inv_sqrt2),
        ))
    }

    /// Dense `N×N` covariance (normative product formula).
    pub fn dense(&self, idx: &DyadIndex) -> Result<DMatrix<f64>> {
        self.check(idx, idx.len())?;
        Ok(assemble_product_covariance(&self.k, idx))
    }

    /// Dense `N×N` inverse covariance assembled in `O(N² n)` as
    /// `Ξ(P) − R (P∘P)⁻¹ Rᵀ`, where `Ξ(P)` is the product formula applied to
    /// `P = K⁻¹` and `R[(i,j),k] = √2 P[i,k] P[j,k]`.
    pub fn dense_inverse(&self, idx: &DyadIndex) -> Result<DMatrix<f64>> {
        self.check(idx, idx.len())?;
        let n_dyads = idx.len();
        let mut out = assemble_product_covariance(&self.p, idx);

        // G = L_M⁻¹ Rᵀ, correction is GᵀG.
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut r_t = DMatrix::zeros(self.n, n_dyads);
        for (row, &(i, j)) in idx.pairs().iter().enumerate() {
            for c in 0..self.n {
                r_t[(c, row)] = sqrt2 * self.p[(i, c)] * self.p[(j, c)];
            }
        }
        let g = self
            .m_chol
            .l
            .solve_lower_triangular(&r_t)
            .expect("factor is nonsingular");
        // Large syrk; route through faer (nalgebra gemm is the bottleneck here).
        let gf = faer::Mat::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)]);
        let corr = gf.transpose() * &gf;
        for b in 0..n_dyads {
            for a in 0..n_dyads {
                out[(a, b)] -= corr[(a, b)];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::kernel::{node_correlation_matrix, KernelSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_setup(n: usize, seed: u64) -> (DMatrix<f64>, DyadIndex) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let spec = KernelSpec::matern32(0.4).unwrap();
        let k = node_correlation_matrix(&coords, &spec).unwrap();
        (k, DyadIndex::new(n).unwrap())
    }

    #[test]
    fn identity_k_gives_identity_sigma() {
        let idx = DyadIndex::new(4).unwrap();
        let k = DMatrix::identity(4, 4);
        let cov = dyadic_covariance(&k, &idx).unwrap();
        assert_relative_eq!(cov.matrix, DMatrix::identity(6, 6), epsilon = 1e-15);
    }

    #[test]
    fn diagonal_is_one_plus_k_squared() {
        let (k, idx) = random_setup(6, 1);
        let cov = dyadic_covariance(&k, &idx).unwrap();
        for (row, &(i, j)) in idx.pairs().iter().enumerate() {
            assert_relative_eq!(
                cov.matrix[(row, row)],
                1.0 + k[(i, j)] * k[(i, j)],
                epsilon = 1e-14
            );
            assert!(cov.matrix[(row, row)] >= 1.0 && cov.matrix[(row, row)] <= 2.0);
        }
    }

    #[test]
    fn matches_brute_force_oracle() {
        for seed in 0..5 {
            let (k, idx) = random_setup(6, seed);
            let cov = dyadic_covariance(&k, &idx).unwrap();
            let brute = crate::covariance::oracle::brute_force_dyadic_covariance(&k, &idx);
            assert_eq!(cov.matrix, brute);
        }
    }

    #[test]
    fn structured_logdet_matches_dense() {
        let (k, idx) = random_setup(7, 11);
        let gp = DyadicGp::new(k).unwrap();
        let dense = gp.dense(&idx).unwrap();
        let chol = cholesky_psd(&dense, 1e-12).unwrap();
        assert_eq!(chol.jitter, 0.0);
        assert_relative_eq!(gp.logdet(), chol.logdet(), epsilon = 1e-8);
    }

    #[test]
    fn structured_apply_and_inverse_match_dense() {
        let (k, idx) = random_setup(7, 3);
        let gp = DyadicGp::new(k).unwrap();
        let dense = gp.dense(&idx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = DVector::from_fn(idx.len(), |_, _| rng.random::<f64>() - 0.5);

        let fwd = gp.apply(&y, &idx).unwrap();
        assert_relative_eq!(fwd, &dense * &y, epsilon = 1e-12);

        let inv = gp.inv_apply(&y, &idx).unwrap();
        let chol = cholesky_psd(&dense, 1e-12).unwrap();
        assert_relative_eq!(inv, chol.solve_vec(&y), epsilon = 1e-8);
    }

    #[test]
    fn dense_inverse_matches_solve() {
        let (k, idx) = random_setup(6, 9);
        let gp = DyadicGp::new(k).unwrap();
        let dense = gp.dense(&idx).unwrap();
        let inv = gp.dense_inverse(&idx).unwrap();
        let prod = &dense * &inv;
        assert_relative_eq!(prod, DMatrix::identity(idx.len(), idx.len()), epsilon = 1e-8);
    }

    #[test]
    fn psd_on_random_instances() {
        for seed in 0..8 {
            let n = 3 + (seed as usize % 10);
            let (k, idx) = random_setup(n, seed + 100);
            let cov = dyadic_covariance(&k, &idx).unwrap();
            let eig = cov.matrix.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "min eigenvalue {min} at n={n}");
        }
    }

    #[test]
    fn prior_sample_covariance_is_close() {
        let (k, idx) = random_setup(4, 2);
        let gp = DyadicGp::new(k).unwrap();
        let dense = gp.dense(&idx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = 40_000;
        let n_dyads = idx.len();
        let mut cov = DMatrix::zeros(n_dyads, n_dyads);
        let mut mean = DVector::zeros(n_dyads);
        for _ in 0..m {
            let w = gp.sample_prior(&idx, &mut rng).unwrap();
            mean += &w;
            cov += &w * w.transpose();
        }
        mean /= m as f64;
        cov = cov / m as f64 - &mean * mean.transpose();
        let rel = (cov - &dense).norm() / dense.norm();
        assert!(rel < 0.05, "rel={rel}");
    }

    #[test]
    fn rejects_mismatched_index() {
        let (k, _) = random_setup(5, 0);
        let gp = DyadicGp::new(k).unwrap();
        let idx4 = DyadIndex::new(4).unwrap();
        assert!(gp.dense(&idx4).is_err());
    }
}
