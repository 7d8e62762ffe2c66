//! Ground-truth synthetic data: uniform nodes, standardized covariate
//! differences, a barrier/corridor pathway pair, latent spatial fields, and
//! dyadic responses with every generating quantity retained.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{cholesky_psd, node_correlation_matrix, DyadicGp, KernelFamily, KernelSpec};
use crate::design::{
    assemble_design, closeness_scores, shared_segment_covariates, standardize_columns,
    DesignMatrix, DyadicData, PathwayClass,
};
use crate::dyad::{pairwise_difference_matrix, DyadIndex, NodeSet};
use crate::error::{Error, Result};

/// Simulated pathway layout kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathwayKind {
    HorizontalBarrier,
    VerticalCorridor,
}

/// A single domain-spanning pathway at the center line of the unit square
/// (scaled by `scale` for larger domains).
pub fn make_pathways(kind: PathwayKind, scale: f64, tau: f64) -> Result<PathwayClass> {
    let mid = 0.5 * scale;
    let (name, polyline) = match kind {
        PathwayKind::HorizontalBarrier => ("barrier", vec![[0.0, mid], [scale, mid]]),
        PathwayKind::VerticalCorridor => ("corridor", vec![[mid, 0.0], [mid, scale]]),
    };
    PathwayClass::new(name, vec![polyline], tau)
}

/// Generator configuration; the defaults reproduce the reference synthetic
/// protocol (n=100 uniform nodes, p=4 covariates, two pathway classes).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub p_env: usize,
    pub q: usize,
    pub alpha: f64,
    /// Global coefficients for the p + 2 design columns; `None` uses the
    /// defaults (only valid when p = 4).
    pub beta: Option<Vec<f64>>,
    pub sigma2: f64,
    pub sigma2_eta: f64,
    /// Spatial range of η; `None` uses max distance / 5.
    pub phi_eta: Option<f64>,
    /// Pathway decay scale.
    pub tau: f64,
    /// Side length of the square domain.
    pub scale: f64,
    /// When set, only the first k factors receive nonzero loadings.
    pub active_factors: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 100,
            p_env: 4,
            q: 6,
            alpha: 10.0,
            beta: None,
            sigma2: 5.0,
            sigma2_eta: 5.0,
            phi_eta: None,
            tau: 0.07,
            scale: 1.0,
            active_factors: None,
        }
    }
}

/// Default global coefficients: four environmental effects plus a positive
/// barrier and a negative corridor coefficient.
pub const DEFAULT_BETA: [f64; 6] = [2.88, 3.64, 3.76, 4.35, 2.00, -1.30];

/// A complete synthetic dataset with its generating parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub nodes: NodeSet,
    pub pathways: Vec<PathwayClass>,
    pub design: DesignMatrix,
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub sigma2_eta: f64,
    pub phi_eta: f64,
    pub eta: DVector<f64>,
    pub w: DMatrix<f64>,
    pub c_load: DMatrix<f64>,
    pub phi_q: Vec<f64>,
    /// Column-centered DSVC matrix actually used in generation.
    pub delta: DMatrix<f64>,
    pub response: DVector<f64>,
    /// The exact noise added per dyad; the response is regenerable as
    /// mean + noise.
    pub noise: DVector<f64>,
    pub seed: u64,
}

impl SimTruth {
    /// The fitted mean component (everything except the noise).
    pub fn mean(&self) -> DVector<f64> {
        &self.response - &self.noise
    }

    /// Packages the realization as fitter input.
    pub fn data(&self) -> Result<DyadicData> {
        DyadicData::new(
            self.nodes.ids.clone(),
            self.nodes.coords.clone(),
            self.response.clone(),
            self.design.clone(),
        )
    }
}

fn half_cauchy<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (std::f64::consts::FRAC_PI_2 * rng.random::<f64>()).tan()
}

/// Generates one synthetic dataset; deterministic for a fixed seed.
pub fn simulate_dataset(cfg: &SimConfig, seed: u64) -> Result<SimTruth> {
    if cfg.n_nodes < 4 {
        return Err(Error::invalid_input("simulator needs n >= 4 nodes"));
    }
    if cfg.q < 1 {
        return Err(Error::invalid_input("simulator needs Q >= 1"));
    }
    if !(cfg.sigma2 >= 0.0) || !(cfg.sigma2_eta >= 0.0) {
        return Err(Error::invalid_input("variances must be nonnegative"));
    }
    if !(cfg.tau > 0.0) || !(cfg.scale > 0.0) {
        return Err(Error::invalid_input("tau and scale must be positive"));
    }
    if let Some(k) = cfg.active_factors {
        if k > cfg.q {
            return Err(Error::invalid_input("active_factors exceeds Q"));
        }
    }
    let p_total = cfg.p_env + 2;
    let beta = match &cfg.beta {
        Some(b) => {
            if b.len() != p_total {
                return Err(Error::invalid_input(format!(
                    "beta must have {p_total} entries, got {}",
                    b.len()
                )));
            }
            DVector::from_column_slice(b)
        }
        None => {
            if cfg.p_env != 4 {
                return Err(Error::invalid_input(
                    "default beta requires p = 4; supply beta explicitly",
                ));
            }
            DVector::from_column_slice(&DEFAULT_BETA)
        }
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = cfg.n_nodes;
    let idx = DyadIndex::new(n)?;

    // Nodes and environmental covariates.
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [cfg.scale * rng.random::<f64>(), cfg.scale * rng.random::<f64>()])
        .collect();
    let raw_cov = DMatrix::from_fn(n, cfg.p_env, |_, _| {
        5.0 * rng.sample::<f64, _>(StandardNormal)
    });
    let (std_cov, _, _) = standardize_columns(&raw_cov);
    let nodes = NodeSet::new(
        (1..=n).map(|i| i.to_string()).collect(),
        coords,
        std_cov.clone(),
        (1..=cfg.p_env).map(|c| format!("env{c}")).collect(),
    )?;
    let env = pairwise_difference_matrix(&std_cov, &idx)?;

    // Connectivity covariates from the barrier/corridor pair.
    let pathways = vec![
        make_pathways(PathwayKind::HorizontalBarrier, cfg.scale, cfg.tau)?,
        make_pathways(PathwayKind::VerticalCorridor, cfg.scale, cfg.tau)?,
    ];
    let mut conn = DMatrix::zeros(idx.len(), pathways.len());
    for (c, class) in pathways.iter().enumerate() {
        let v = closeness_scores(&nodes, class)?;
        conn.set_column(c, &shared_segment_covariates(&v, &idx)?);
    }
    let design = assemble_design(&env, &conn, true)?;
    let z = &design.combined;

    // Node-level spatial random effects (exponential kernel).
    let dist = nodes.distance_matrix();
    let max_dist = dist.max();
    let phi_eta = cfg.phi_eta.unwrap_or(max_dist / 5.0);
    let eta = if cfg.sigma2_eta > 0.0 {
        let spec = KernelSpec::new(KernelFamily::Exponential, phi_eta)?;
        let r = node_correlation_matrix(&nodes.coords, &spec)?;
        let chol = cholesky_psd(&r, 1e-10)?;
        let zvec = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        cfg.sigma2_eta.sqrt() * (&chol.l * zvec)
    } else {
        DVector::zeros(n)
    };

    // Latent dyadic factors with log-normal spatial ranges.
    let mut offdiag: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            offdiag.push(dist[(i, j)]);
        }
    }
    offdiag.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = offdiag[offdiag.len() / 2];
    let mu_logphi = median.ln();

    let mut w = DMatrix::zeros(idx.len(), cfg.q);
    let mut phi_q = Vec::with_capacity(cfg.q);
    for qi in 0..cfg.q {
        let phi = (mu_logphi + 1.5 * rng.sample::<f64, _>(StandardNormal)).exp();
        phi_q.push(phi);
        let spec = KernelSpec::matern32(phi)?;
        let gp = DyadicGp::new(node_correlation_matrix(&nodes.coords, &spec)?)?;
        w.set_column(qi, &gp.sample_prior(&idx, &mut rng)?);
    }

    // Horseshoe-drawn loadings; optionally silence trailing factors.
    let active = cfg.active_factors.unwrap_or(cfg.q);
    let mut c_load = DMatrix::zeros(p_total, cfg.q);
    for qi in 0..cfg.q {
        let xi = half_cauchy(&mut rng);
        for l in 0..p_total {
            let lambda = half_cauchy(&mut rng);
            c_load[(l, qi)] = lambda * xi * rng.sample::<f64, _>(StandardNormal);
        }
        if qi >= active {
            for l in 0..p_total {
                c_load[(l, qi)] = 0.0;
            }
        }
    }

    // Column-centered DSVCs.
    let mut delta = &w * c_load.transpose();
    for c in 0..p_total {
        let mean = delta.column(c).mean();
        for r in 0..delta.nrows() {
            delta[(r, c)] -= mean;
        }
    }

    // Responses.
    let noise_sd = cfg.sigma2.sqrt();
    let noise = DVector::from_fn(idx.len(), |_, _| {
        noise_sd * rng.sample::<f64, _>(StandardNormal)
    });
    let mut response = z * &beta + &noise;
    for (row, &(i, j)) in idx.pairs().iter().enumerate() {
        response[row] += cfg.alpha + z.row(row).dot(&delta.row(row)) + eta[j] - eta[i];
    }

    Ok(SimTruth {
        nodes,
        pathways,
        design,
        alpha: cfg.alpha,
        beta,
        sigma2: cfg.sigma2,
        sigma2_eta: cfg.sigma2_eta,
        phi_eta,
        eta,
        w,
        c_load,
        phi_q,
        delta,
        response,
        noise,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pathway_geometry_matches_layout() {
        let barrier = make_pathways(PathwayKind::HorizontalBarrier, 1.0, 0.07).unwrap();
        assert_eq!(barrier.features, vec![vec![[0.0, 0.5], [1.0, 0.5]]]);
        let corridor = make_pathways(PathwayKind::VerticalCorridor, 1.0, 0.07).unwrap();
        assert_eq!(corridor.features, vec![vec![[0.5, 0.0], [0.5, 1.0]]]);
        // The domain center touches both features.
        for class in [&barrier, &corridor] {
            let d = crate::design::point_to_polyline(&[0.5, 0.5], &class.features[0]);
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn default_shapes() {
        let truth = simulate_dataset(&SimConfig::default(), 7).unwrap();
        assert_eq!(truth.response.len(), 4950);
        assert_eq!(truth.design.combined.shape(), (4950, 6));
        assert_eq!(truth.beta[4], 2.00);
        assert_eq!(truth.beta[5], -1.30);
        assert_eq!(truth.w.ncols(), 6);
        assert_relative_eq!(truth.phi_eta, truth.nodes.distance_matrix().max() / 5.0);
    }

    #[test]
    fn noiseless_linear_case_is_exact() {
        let cfg = SimConfig {
            n_nodes: 12,
            sigma2: 0.0,
            sigma2_eta: 0.0,
            active_factors: Some(0),
            ..SimConfig::default()
        };
        let truth = simulate_dataset(&cfg, 3).unwrap();
        let lin = &truth.design.combined * &truth.beta;
        for k in 0..truth.response.len() {
            assert_relative_eq!(truth.response[k], truth.alpha + lin[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn response_regenerates_from_stored_noise() {
        let truth = simulate_dataset(&SimConfig { n_nodes: 15, ..SimConfig::default() }, 11).unwrap();
        let idx = DyadIndex::new(15).unwrap();
        let z = &truth.design.combined;
        let mut mean = z * &truth.beta;
        for (row, &(i, j)) in idx.pairs().iter().enumerate() {
            mean[row] += truth.alpha + z.row(row).dot(&truth.delta.row(row)) + truth.eta[j] - truth.eta[i];
        }
        assert!((mean + &truth.noise - &truth.response).amax() < 1e-12);
    }

    #[test]
    fn delta_columns_are_centered() {
        let truth = simulate_dataset(&SimConfig { n_nodes: 20, ..SimConfig::default() }, 5).unwrap();
        for c in 0..truth.delta.ncols() {
            assert!(truth.delta.column(c).mean().abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = SimConfig { n_nodes: 10, ..SimConfig::default() };
        let a = simulate_dataset(&cfg, 42).unwrap();
        let b = simulate_dataset(&cfg, 42).unwrap();
        assert_eq!(a.response, b.response);
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.eta, b.eta);
        let c = simulate_dataset(&cfg, 43).unwrap();
        assert_ne!(a.response, c.response);
    }

    #[test]
    fn eta_scale_matches_sigma_eta() {
        // Average sd of η across seeds should approach √σ²_η.
        let cfg = SimConfig { n_nodes: 100, ..SimConfig::default() };
        let mut acc = 0.0;
        let reps = 12;
        for seed in 0..reps {
            let truth = simulate_dataset(&cfg, 1000 + seed).unwrap();
            let v = truth.eta.iter().map(|e| e * e).sum::<f64>() / 100.0;
            acc += v;
        }
        let sd = (acc / reps as f64).sqrt();
        let target = cfg.sigma2_eta.sqrt();
        assert!(
            (sd - target).abs() / target < 0.05,
            "eta sd {sd} vs {target}"
        );
    }

    #[test]
    fn active_factor_override_silences_loadings() {
        let cfg = SimConfig { n_nodes: 10, active_factors: Some(3), ..SimConfig::default() };
        let truth = simulate_dataset(&cfg, 1).unwrap();
        for q in 3..6 {
            assert!(truth.c_load.column(q).amax() == 0.0);
        }
        assert!(truth.c_load.columns(0, 3).amax() > 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(simulate_dataset(&SimConfig { n_nodes: 3, ..SimConfig::default() }, 0).is_err());
        assert!(simulate_dataset(&SimConfig { q: 0, ..SimConfig::default() }, 0).is_err());
        assert!(
            simulate_dataset(
                &SimConfig { beta: Some(vec![1.0; 3]), ..SimConfig::default() },
                0
            )
            .is_err()
        );
        assert!(simulate_dataset(&SimConfig { p_env: 3, ..SimConfig::default() }, 0).is_err());
        assert!(
            simulate_dataset(&SimConfig { active_factors: Some(9), ..SimConfig::default() }, 0)
                .is_err()
        );
    }
}
