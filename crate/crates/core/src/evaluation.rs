//! Scoring and diagnostics: empirical CRPS, split-R̂ / autocorrelation ESS,
//! credible-interval coverage against known truth, and kinship residual
//! summaries on the log1p scale.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical continuous ranked probability score
/// `(1/m)Σ|x_k − y| − (1/(2m²))ΣΣ|x_k − x_l|`, computed in O(m log m)
/// via the sorted representation of the pairwise term.
pub fn crps_empirical(samples: &[f64], y: f64) -> Result<f64> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::invalid_input("CRPS needs at least one sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("non-finite CRPS sample"));
    let abs_term = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / m as f64;
    // Σ_kΣ_l |x_k − x_l| = 2 Σ_i (2i + 1 − m) x_(i) over the sorted values.
    let pair_term = xs
        .iter()
        .enumerate()
        .map(|(i, x)| ((2 * i + 1) as f64 - m as f64) * x)
        .sum::<f64>()
        / (m * m) as f64;
    Ok(abs_term - pair_term)
}

/// Split-R̂ and effective sample size for one parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: f64,
    pub ess: f64,
    /// Set when the chains carry no variance; `rhat`/`ess` are NaN.
    pub degenerate: bool,
}

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn autocovariance(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    (0..n - lag)
        .map(|i| (xs[i] - mean) * (xs[i + lag] - mean))
        .sum::<f64>()
        / n as f64
}

/// Split-R̂ (each chain halved, between/within variance ratio) and ESS from
/// the initial-positive-sequence truncation of the pooled autocorrelations.
/// Zero-variance chains yield a NaN flag instead of an error.
pub fn convergence_diagnostics(chains: &[Vec<f64>]) -> Result<Diagnostics> {
    if chains.is_empty() {
        return Err(Error::invalid_input("diagnostics need at least one chain"));
    }
    let min_len = chains.iter().map(Vec::len).min().unwrap();
    if min_len < 4 {
        return Err(Error::invalid_input("diagnostics need chain length >= 4"));
    }
    let half = min_len / 2;
    let mut splits: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        splits.push(&chain[..half]);
        splits.push(&chain[half..2 * half]);
    }
    let m = splits.len() as f64;
    let n = half as f64;

    let within: Vec<f64> = splits.iter().map(|s| sample_var(s)).collect();
    let w = within.iter().sum::<f64>() / m;
    if !(w > 0.0) {
        return Ok(Diagnostics { rhat: f64::NAN, ess: f64::NAN, degenerate: true });
    }
    let means: Vec<f64> = splits
        .iter()
        .map(|s| s.iter().sum::<f64>() / n)
        .collect();
    let b = n * sample_var(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    let rhat = (var_plus / w).sqrt();

    // Pooled autocorrelations, summed over Geyer's initial positive pairs.
    let rho = |lag: usize| -> f64 {
        let acov = splits.iter().map(|s| autocovariance(s, lag)).sum::<f64>() / m;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < half {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let ess = m * n / tau;
    Ok(Diagnostics { rhat, ess, degenerate: false })
}

/// Named diagnostics for one scalar parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub parameter: String,
    #[serde(flatten)]
    pub diag: Diagnostics,
}

/// Linear-interpolation quantile of an unsorted slice.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite quantile input"));
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// One row of the coverage table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub parameter: String,
    pub truth: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

/// Equal-tailed 95% credible interval per parameter, flagged against truth.
pub fn interval_coverage(
    names: &[String],
    draws: &[Vec<f64>],
    truth: &[f64],
) -> Result<Vec<CoverageRow>> {
    if names.len() != draws.len() || names.len() != truth.len() {
        return Err(Error::invalid_input("coverage inputs must align"));
    }
    names
        .iter()
        .zip(draws)
        .zip(truth)
        .map(|((name, d), t)| {
            if d.is_empty() {
                return Err(Error::invalid_input(format!("no draws for {name}")));
            }
            let lower = quantile(d, 0.025);
            let upper = quantile(d, 0.975);
            Ok(CoverageRow {
                parameter: name.clone(),
                truth: *t,
                lower,
                upper,
                covered: (lower..=upper).contains(t),
            })
        })
        .collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Default near-clonal cutoff: fewer than 50 discordant loci of 1200.
pub const NEAR_CLONAL_THRESHOLD: f64 = 50.0;

/// Per-dyad kinship and log1p residual summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinshipResiduals {
    /// Posterior mean of k − k̂ per dyad, k = 1 − logistic(response).
    pub kinship_residual: Vec<f64>,
    /// Posterior mean of log(1 + |ỹ − y*|) per dyad.
    pub mean_log1p_residual: Vec<f64>,
    /// Posterior sd of the log1p absolute residual per dyad.
    pub sd_log1p_residual: Vec<f64>,
    pub all_pairs_mean: f64,
    /// Mean log1p residual over near-clonal dyads; `None` without mismatch
    /// counts or when no dyad falls under the threshold.
    pub near_clonal_mean: Option<f64>,
    pub near_clonal_count: usize,
}

/// Residual summaries from predictive draws (rows = draws, columns = dyads).
/// `mismatches` enables the near-clonal split (counts below `threshold`).
pub fn kinship_residuals(
    predictive: &DMatrix<f64>,
    observed: &DVector<f64>,
    mismatches: Option<&[f64]>,
    threshold: f64,
) -> Result<KinshipResiduals> {
    let (k_draws, n) = predictive.shape();
    if k_draws == 0 || n != observed.len() {
        return Err(Error::invalid_input(
            "predictive draws must be nonempty and match the observations",
        ));
    }
    if let Some(m) = mismatches {
        if m.len() != n {
            return Err(Error::invalid_input("mismatch counts must match dyads"));
        }
    }
    let mut kinship_residual = Vec::with_capacity(n);
    let mut mean_log1p = Vec::with_capacity(n);
    let mut sd_log1p = Vec::with_capacity(n);
    for d in 0..n {
        let y = observed[d];
        let k_true = 1.0 - logistic(y);
        let mut kr = 0.0;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for it in 0..k_draws {
            let pred = predictive[(it, d)];
            kr += k_true - (1.0 - logistic(pred));
            let r = (y - pred).abs().ln_1p();
            s += r;
            s2 += r * r;
        }
        let kf = k_draws as f64;
        kinship_residual.push(kr / kf);
        let mean = s / kf;
        mean_log1p.push(mean);
        sd_log1p.push((s2 / kf - mean * mean).max(0.0).sqrt());
    }
    let all_pairs_mean = mean_log1p.iter().sum::<f64>() / n as f64;
    let (near_clonal_mean, near_clonal_count) = match mismatches {
        Some(counts) => {
            let sel: Vec<f64> = counts
                .iter()
                .zip(&mean_log1p)
                .filter(|(c, _)| **c < threshold)
                .map(|(_, r)| *r)
                .collect();
            if sel.is_empty() {
                (None, 0)
            } else {
                (Some(sel.iter().sum::<f64>() / sel.len() as f64), sel.len())
            }
        }
        None => (None, 0),
    };
    Ok(KinshipResiduals {
        kinship_residual,
        mean_log1p_residual: mean_log1p,
        sd_log1p_residual: sd_log1p,
        all_pairs_mean,
        near_clonal_mean,
        near_clonal_count,
    })
}

/// Posterior predictive draws `y* = μ + N(0, σ²)` per retained iteration;
/// `fitted` rows are the retained posterior means of the dyadic responses.
pub fn predictive_draws<R: Rng + ?Sized>(
    fitted: &[DVector<f64>],
    sigma2: &[f64],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if fitted.is_empty() || fitted.len() != sigma2.len() {
        return Err(Error::invalid_input(
            "fitted draws and sigma2 draws must align and be nonempty",
        ));
    }
    let n = fitted[0].len();
    let mut out = DMatrix::zeros(fitted.len(), n);
    for (it, (mu, s2)) in fitted.iter().zip(sigma2).enumerate() {
        if mu.len() != n {
            return Err(Error::invalid_input("inconsistent fitted draw length"));
        }
        let sd = s2.max(0.0).sqrt();
        for d in 0..n {
            out[(it, d)] = mu[d] + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// The complete scoring artifact serialized to score.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub crps: Vec<f64>,
    pub mean_crps: f64,
    pub diagnostics: Vec<ParamDiagnostic>,
    pub coverage: Vec<CoverageRow>,
    pub kinship: Option<KinshipResiduals>,
}
