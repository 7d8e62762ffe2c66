use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::design::DyadicData;
use crate::error::{Error, Result};

use super::eta::update_eta_block;
use super::factors::{update_factor_block, FactorStats, FactorUpdateOpts};
use super::loadings::update_loadings_block;
use super::prior::PriorConfig;
use super::regression::update_regression_block;
use super::state::{init_state, recenter_rescale, ModelState, Workspace};

/// Which mean components the fitted model includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Environmental differences and spatial random effects only.
    Standard,
    /// Adds connectivity covariates, no spatially varying coefficients.
    ConnOnly,
    /// Adds spatially varying coefficients, no connectivity covariates.
    DsvcOnly,
    /// Connectivity covariates and spatially varying coefficients.
    Full,
}

impl ModelVariant {
    pub fn includes_connectivity(&self) -> bool {
        matches!(self, ModelVariant::ConnOnly | ModelVariant::Full)
    }

    pub fn includes_factors(&self) -> bool {
        matches!(self, ModelVariant::DsvcOnly | ModelVariant::Full)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Standard => "standard",
            ModelVariant::ConnOnly => "conn_only",
            ModelVariant::DsvcOnly => "dsvc_only",
            ModelVariant::Full => "full",
        }
    }
}

/// Iteration schedule for one chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Schedule {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub variant: ModelVariant,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.burnin > self.iterations {
            return Err(Error::Config("burnin exceeds iterations".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }
}

/// Retained posterior draws. Vector-valued parameters are stored row-major:
/// one inner `Vec` per retained draw.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Draws {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub sigma2_eta: Vec<f64>,
    pub phi_eta: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub phi_q: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Fitted dyadic means per retained draw (for scoring), if stored.
    pub fitted: Vec<Vec<f64>>,
    /// Thinned raw Δ draws (flattened row-major N×(p+C)), if stored.
    pub delta: Vec<Vec<f64>>,
    /// Latent factor draws (flattened row-major N×Q), if stored.
    pub w: Vec<Vec<f64>>,
    /// Loading draws (flattened row-major (p+C)×Q), if stored.
    pub c_load: Vec<Vec<f64>>,
}

/// Chain provenance and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub schedule: Schedule,
    /// The hyperparameters the chain actually ran with; map prediction
    /// reads kernel families and ranges from here.
    pub prior: PriorConfig,
    pub n_draws: usize,
    pub n_nodes: usize,
    pub n_dyads: usize,
    pub n_covariates: usize,
    pub q: usize,
    /// Whitened joint-move acceptance rate per factor.
    pub joint_acceptance: Vec<f64>,
    /// Count of jittered factorizations across the run.
    pub jitter_events: u64,
}

/// Everything a finished chain hands back: thinned draws, posterior summaries
/// of Δ, and run metadata.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Draws,
    /// Posterior mean of Δ per dyad and covariate (N × (p+C)).
    pub delta_mean: DMatrix<f64>,
    /// Posterior sd of Δ per dyad and covariate.
    pub delta_sd: DMatrix<f64>,
    pub meta: ChainMeta,
    /// The final state, for restarts and debugging.
    pub final_state: ModelState,
}

/// Storage switches for bulky per-draw quantities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StorageOpts {
    pub store_fitted: bool,
    pub store_delta_draws: bool,
    /// Keep per-draw factor and loading matrices (needed for map products).
    pub store_factors: bool,
}

impl Default for StorageOpts {
    fn default() -> Self {
        Self { store_fitted: true, store_delta_draws: false, store_factors: false }
    }
}

/// Runs one chain: each sweep is regression → η → factor blocks → loadings →
/// recenter, with blocks absent from the variant skipped. Deterministic for a
/// fixed seed.
pub fn run_chain(
    data: &DyadicData,
    prior: &PriorConfig,
    schedule: &Schedule,
    storage: StorageOpts,
) -> Result<ChainOutput> {
    schedule.validate()?;
    prior.validate()?;

    // Variant selects the active design columns.
    let p_env = data.design.env_block.ncols();
    let z = if schedule.variant.includes_connectivity() {
        data.design.combined.clone()
    } else {
        data.design.combined.columns(0, p_env).into_owned()
    };
    let ws = Workspace::new(data, z)?;

    let mut rng = ChaCha20Rng::seed_from_u64(schedule.seed);
    let mut state = init_state(&ws, prior, schedule.seed)?;
    let with_factors = schedule.variant.includes_factors();
    if !with_factors {
        // Freeze the factor machinery at zero.
        state.w.fill(0.0);
        state.c_load.fill(0.0);
    }

    let q = prior.q;
    let mut factor_stats = vec![FactorStats::default(); q];
    let mut draws = Draws::default();
    let n_dyads = ws.n_dyads();
    let p_active = ws.n_covariates();
    let mut delta_sum = DMatrix::zeros(n_dyads, p_active);
    let mut delta_sq_sum = DMatrix::zeros(n_dyads, p_active);
    let mut kept = 0usize;

    let wrap = |block: &'static str, it: usize| move |e: Error| e.in_block(block, it);

    for it in 1..=schedule.iterations {
        let stepout = if it <= prior.slice_burnin_iters {
            prior.slice_burnin_stepout
        } else {
            prior.slice_max_stepout
        };

        update_regression_block(&mut state, &ws, prior, &mut rng)
            .map_err(wrap("regression", it))?;
        update_eta_block(&mut state, &ws, prior, stepout, &mut rng).map_err(wrap("eta", it))?;

        if with_factors {
            let opts = FactorUpdateOpts { attempt_joint: it % 2 == 1, stepout_budget: stepout };
            for fq in 0..q {
                update_factor_block(&mut state, &ws, prior, fq, opts, &mut factor_stats[fq], &mut rng)
                    .map_err(wrap("factor", it))?;
            }
            update_loadings_block(&mut state, &ws, prior, &mut rng)
                .map_err(wrap("loadings", it))?;
            recenter_rescale(&mut state);
        }

        if it > schedule.burnin && (it - schedule.burnin) % schedule.thin == 0 {
            kept += 1;
            draws.alpha.push(state.alpha);
            draws.beta.push(state.beta.iter().cloned().collect());
            draws.sigma2.push(state.sigma2);
            draws.sigma2_eta.push(state.sigma2_eta);
            draws.phi_eta.push(state.phi_eta);
            draws.eta.push(state.eta.iter().cloned().collect());
            draws.phi_q.push(state.phi_q.clone());
            draws.xi.push(state.xi.clone());

            let delta = state.delta();
            delta_sum += &delta;
            delta_sq_sum += delta.component_mul(&delta);
            if storage.store_delta_draws {
                draws.delta.push(delta.transpose().as_slice().to_vec());
            }
            if storage.store_factors {
                draws.w.push(state.w.transpose().as_slice().to_vec());
                draws.c_load.push(state.c_load.transpose().as_slice().to_vec());
            }
            if storage.store_fitted {
                let mu: DVector<f64> = state.fitted_mean(&ws);
                draws.fitted.push(mu.iter().cloned().collect());
            }
        }
    }

    let (delta_mean, delta_sd) = if kept > 0 {
        let mean = &delta_sum / kept as f64;
        let var = (&delta_sq_sum / kept as f64 - mean.component_mul(&mean)).map(|v| v.max(0.0));
        (mean, var.map(f64::sqrt))
    } else {
        (DMatrix::zeros(n_dyads, p_active), DMatrix::zeros(n_dyads, p_active))
    };

    debug_assert_eq!(kept, schedule.n_draws());
    let meta = ChainMeta {
        schedule: *schedule,
        prior: prior.clone(),
        n_draws: kept,
        n_nodes: ws.n_nodes(),
        n_dyads,
        n_covariates: p_active,
        q,
        joint_acceptance: factor_stats.iter().map(FactorStats::acceptance_rate).collect(),
        jitter_events: factor_stats.iter().map(|s| s.jitter_events).sum(),
    };

    Ok(ChainOutput { draws, delta_mean, delta_sd, meta, final_state: state })
}
