use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::DyadicData;
use crate::dyad::DyadIndex;
use crate::error::{Error, Result};

use super::prior::PriorConfig;

/// Orthonormal Helmert-style basis `U` (n × (n−1)) with `U'1 = 0`. Column k
/// averages the first k entries against the (k+1)th.
pub fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            u[(i, k - 1)] = norm;
        }
        u[(k, k - 1)] = -(k as f64) * norm;
    }
    u
}

/// Immutable per-chain precomputations: the active design, responses, the
/// η-subspace basis and its dyadic image, and the regression cross-products.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// Active design columns for the fitted variant, one row per dyad.
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub idx: DyadIndex,
    pub coords: Vec<[f64; 2]>,
    /// Node distance matrix.
    pub dist: DMatrix<f64>,
    /// n × (n−1) orthonormal basis with `U'1 = 0`.
    pub u: DMatrix<f64>,
    /// `M U`: the dyadic image of the basis (N × (n−1)).
    pub mu_map: DMatrix<f64>,
    /// Cross-product of `[1 Z]` for the regression block.
    pub xtx: DMatrix<f64>,
}

impl Workspace {
    pub fn new(data: &DyadicData, z: DMatrix<f64>) -> Result<Self> {
        let idx = data.idx.clone();
        let n = idx.n_nodes();
        let n_dyads = idx.len();
        if z.nrows() != n_dyads {
            return Err(Error::invalid_input("design rows must match dyad count"));
        }
        let u = helmert_basis(n);
        let mut mu_map = DMatrix::zeros(n_dyads, n - 1);
        for (row, &(i, j)) in idx.pairs().iter().enumerate() {
            for c in 0..(n - 1) {
                mu_map[(row, c)] = u[(j, c)] - u[(i, c)];
            }
        }
        let p = z.ncols();
        let mut x = DMatrix::from_element(n_dyads, p + 1, 1.0);
        x.view_mut((0, 1), (n_dyads, p)).copy_from(&z);
        let xtx = x.transpose() * &x;
        Ok(Self {
            z,
            y: data.response.clone(),
            idx,
            coords: data.coords.clone(),
            dist: data.distance_matrix(),
            u,
            mu_map,
            xtx,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.idx.n_nodes()
    }

    pub fn n_dyads(&self) -> usize {
        self.idx.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.ncols()
    }
}

/// Every sampled quantity at one MCMC iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    /// η in the (n−1)-dimensional U-subspace.
    pub gamma: DVector<f64>,
    /// `η = U γ`; sums to numerical zero.
    pub eta: DVector<f64>,
    pub sigma2_eta: f64,
    pub phi_eta: f64,
    /// Latent dyadic spatial factors, N × Q.
    pub w: DMatrix<f64>,
    /// Covariate loadings, (p+C) × Q.
    pub c_load: DMatrix<f64>,
    pub phi_q: Vec<f64>,
    /// Local shrinkage scales λ, (p+C) × Q.
    pub lambda: DMatrix<f64>,
    /// Global shrinkage scales ξ, one per factor.
    pub xi: Vec<f64>,
    /// Inverse-gamma augmentation latents for λ.
    pub nu: DMatrix<f64>,
    /// Inverse-gamma augmentation latents for ξ.
    pub zeta: Vec<f64>,
}

impl ModelState {
    /// `Δ = W C'`, one row per dyad.
    pub fn delta(&self) -> DMatrix<f64> {
        &self.w * self.c_load.transpose()
    }

    /// `s_q = Z c_q` for one factor.
    pub fn factor_scale(&self, ws: &Workspace, q: usize) -> DVector<f64> {
        &ws.z * self.c_load.column(q)
    }

    /// Total DSVC contribution to the mean: `Σ_q (Z c_q) ∘ w_q`.
    pub fn factor_contribution(&self, ws: &Workspace) -> DVector<f64> {
        let mut out = DVector::zeros(ws.n_dyads());
        for q in 0..self.w.ncols() {
            let s = self.factor_scale(ws, q);
            for r in 0..out.len() {
                out[r] += s[r] * self.w[(r, q)];
            }
        }
        out
    }

    /// Full fitted mean `α + Zβ + Σ_q s_q ∘ w_q + Mη`.
    pub fn fitted_mean(&self, ws: &Workspace) -> DVector<f64> {
        let mut mu = &ws.z * &self.beta + self.factor_contribution(ws) + &ws.mu_map * &self.gamma;
        mu.add_scalar_mut(self.alpha);
        mu
    }

    /// Gaussian log-likelihood of the responses given the current state.
    pub fn log_likelihood(&self, ws: &Workspace) -> f64 {
        let resid = &ws.y - self.fitted_mean(ws);
        let n = ws.n_dyads() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI * self.sigma2).ln()
            + resid.norm_squared() / self.sigma2)
    }
}

/// Deterministic starting state: data-driven location/scale, latent fields
/// at zero, loadings at small seeded noise, ranges at the prior center.
pub fn init_state(data_ws: &Workspace, prior: &PriorConfig, seed: u64) -> Result<ModelState> {
    prior.validate()?;
    let n_dyads = data_ws.n_dyads();
    let p = data_ws.n_covariates();
    if n_dyads < p + 2 {
        return Err(Error::invalid_input(format!(
            "need at least p+2 = {} dyads, got {n_dyads}",
            p + 2
        )));
    }
    for c in 0..p {
        let col = data_ws.z.column(c);
        let mean = col.mean();
        if col.iter().all(|v| (*v - mean).abs() < 1e-14) {
            return Err(Error::invalid_input(format!("design column {c} has zero variance")));
        }
    }

    let alpha = data_ws.y.mean();
    let centered = data_ws.y.clone().add_scalar(-alpha);
    // Ridge start keeps the initializer defined even for collinear designs.
    let beta = if p > 0 {
        let a = data_ws.z.transpose() * &data_ws.z + DMatrix::identity(p, p);
        let b = data_ws.z.transpose() * &centered;
        nalgebra::Cholesky::new(a)
            .ok_or(Error::NotPositiveDefinite { min_pivot: f64::NAN })?
            .solve(&b)
    } else {
        DVector::zeros(0)
    };
    let resid = &centered - &data_ws.z * &beta;
    let sigma2 = (resid.norm_squared() / n_dyads as f64).max(1e-8);

    let n = data_ws.n_nodes();
    let q = prior.q;
    let phi0 = prior.initial_phi();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let c_load = DMatrix::from_fn(p, q, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));

    Ok(ModelState {
        alpha,
        beta,
        sigma2,
        gamma: DVector::zeros(n - 1),
        eta: DVector::zeros(n),
        sigma2_eta: 1.0,
        phi_eta: phi0,
        w: DMatrix::zeros(n_dyads, q),
        c_load,
        phi_q: vec![phi0; q],
        lambda: DMatrix::from_element(p, q, 1.0),
        xi: vec![1.0; q],
        nu: DMatrix::from_element(p, q, 1.0),
        zeta: vec![1.0; q],
    })
}

/// Recenters the factor columns into β and (when a column's scale drifts far
/// from 1) rescales the factor/loading pair. The fitted mean is unchanged.
pub fn recenter_rescale(state: &mut ModelState) {
    let n_dyads = state.w.nrows();
    let q = state.w.ncols();
    if n_dyads == 0 || q == 0 {
        return;
    }
    let mut w_bar = DVector::zeros(q);
    for c in 0..q {
        w_bar[c] = state.w.column(c).mean();
    }
    for c in 0..q {
        let shift = w_bar[c];
        for r in 0..n_dyads {
            state.w[(r, c)] -= shift;
        }
    }
    state.beta += &state.c_load * &w_bar;

    // Conditional rescale: only intervene when a column's sd leaves [0.1, 10].
    for c in 0..q {
        let col = state.w.column(c);
        let sd = (col.norm_squared() / (n_dyads as f64 - 1.0).max(1.0)).sqrt();
        if sd > 0.0 && !(0.1..=10.0).contains(&sd) {
            for r in 0..n_dyads {
                state.w[(r, c)] /= sd;
            }
            for l in 0..state.c_load.nrows() {
                state.c_load[(l, c)] *= sd;
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::design::{assemble_design, DyadicData};
    use approx::assert_relative_eq;

    pub(crate) fn toy_data(n: usize, p: usize, seed: u64) -> DyadicData {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let idx = DyadIndex::new(n).unwrap();
        let env = DMatrix::from_fn(idx.len(), p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let design = assemble_design(&env, &DMatrix::zeros(idx.len(), 0), false).unwrap();
        let y = DVector::from_fn(idx.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        DyadicData::new(
            (0..n).map(|i| format!("n{i}")).collect(),
            coords,
            y,
            design,
        )
        .unwrap()
    }

    #[test]
    fn helmert_is_orthonormal_and_centered() {
        for n in [2usize, 3, 7, 20] {
            let u = helmert_basis(n);
            let gram = u.transpose() * &u;
            assert_relative_eq!(gram, DMatrix::identity(n - 1, n - 1), epsilon = 1e-12);
            let ones = DVector::from_element(n, 1.0);
            assert!((u.transpose() * ones).norm() < 1e-12);
        }
    }

    #[test]
    fn mu_map_cross_product_is_n_identity() {
        let data = toy_data(8, 2, 0);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let gram = ws.mu_map.transpose() * &ws.mu_map;
        assert_relative_eq!(gram, 8.0 * DMatrix::identity(7, 7), epsilon = 1e-10);
    }

    #[test]
    fn init_state_invariants() {
        let data = toy_data(7, 3, 1);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 4).unwrap();
        let s = init_state(&ws, &prior, 42).unwrap();
        assert!(s.sigma2 > 0.0);
        assert!(s.eta.sum().abs() < 1e-12);
        assert!(s.phi_q.iter().all(|p| {
            let lp = p.ln();
            lp >= prior.logphi_bounds.0 && lp <= prior.logphi_bounds.1
        }));
        assert_eq!(s.w.shape(), (21, 4));
        // Determinism.
        let s2 = init_state(&ws, &prior, 42).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn init_constant_response_floors_sigma2() {
        let mut data = toy_data(5, 1, 2);
        data.response = DVector::from_element(data.response.len(), 3.0);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 1).unwrap();
        let s = init_state(&ws, &prior, 0).unwrap();
        assert_relative_eq!(s.alpha, 3.0, epsilon = 1e-12);
        assert!(s.sigma2 >= 1e-8 && s.sigma2 < 1e-6);
    }

    #[test]
    fn init_rejects_constant_design_column() {
        let mut data = toy_data(5, 2, 3);
        let rows = data.design.combined.nrows();
        data.design.combined.view_mut((0, 1), (rows, 1)).fill(2.0);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 1).unwrap();
        assert!(init_state(&ws, &prior, 0).is_err());
    }

    #[test]
    fn recenter_preserves_fitted_mean() {
        let data = toy_data(6, 2, 4);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 3).unwrap();
        let mut s = init_state(&ws, &prior, 9).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        s.w = DMatrix::from_fn(ws.n_dyads(), 3, |_, _| {
            25.0 * rng.sample::<f64, _>(StandardNormal) + 1.0
        });
        s.c_load = DMatrix::from_fn(2, 3, |_, _| rng.sample::<f64, _>(StandardNormal));

        let before = s.fitted_mean(&ws);
        let lik_before = s.log_likelihood(&ws);
        recenter_rescale(&mut s);
        let after = s.fitted_mean(&ws);
        let lik_after = s.log_likelihood(&ws);

        assert!((before - after).amax() < 1e-10);
        assert!((lik_before - lik_after).abs() < 1e-10 * lik_before.abs().max(1.0));
        // Columns are centered and within the target scale band.
        for c in 0..3 {
            assert!(s.w.column(c).mean().abs() < 1e-12);
            let sd = (s.w.column(c).norm_squared() / (ws.n_dyads() as f64 - 1.0)).sqrt();
            assert!((0.1..=10.0).contains(&sd), "sd={sd}");
        }
    }

    #[test]
    fn recenter_is_noop_on_centered_w() {
        let data = toy_data(5, 2, 6);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 2).unwrap();
        let mut s = init_state(&ws, &prior, 1).unwrap();
        // Build an exactly centered W with sd inside [0.1, 10].
        let m = ws.n_dyads();
        s.w = DMatrix::from_fn(m, 2, |r, c| ((r as f64) - (m as f64 - 1.0) / 2.0) * 0.1 * (c as f64 + 1.0));
        let w0 = s.w.clone();
        let beta0 = s.beta.clone();
        recenter_rescale(&mut s);
        assert_relative_eq!(s.w, w0, epsilon = 1e-12);
        assert_relative_eq!(s.beta, beta0, epsilon = 1e-12);
    }

    #[test]
    fn delta_column_means_zero_after_recenter() {
        let data = toy_data(6, 3, 7);
        let ws = Workspace::new(&data, data.design.combined.clone()).unwrap();
        let prior = PriorConfig::from_distances(&ws.dist, 2).unwrap();
        let mut s = init_state(&ws, &prior, 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        s.w = DMatrix::from_fn(ws.n_dyads(), 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        s.c_load = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        recenter_rescale(&mut s);
        let delta = s.delta();
        for c in 0..delta.ncols() {
            assert!(delta.column(c).mean().abs() < 1e-12);
        }
    }
}
