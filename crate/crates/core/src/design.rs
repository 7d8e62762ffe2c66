//! Dyadic design construction: standardized environmental differences, an
//! optional RBF expansion of the difference space, and connectivity covariates
//! derived from pathway geometry.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dyad::{DyadIndex, NodeSet};
use crate::error::{Error, Result};

/// A named class of linear landscape features sharing one decay scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathwayClass {
    pub name: String,
    /// Polylines in node coordinates; a single vertex is a degenerate point
    /// feature.
    pub features: Vec<Vec<[f64; 2]>>,
    /// Decay scale τ of the closeness transform, in coordinate units.
    pub tau: f64,
}

impl PathwayClass {
    pub fn new(name: impl Into<String>, features: Vec<Vec<[f64; 2]>>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid_input(format!("tau must be positive, got {tau}")));
        }
        if features.is_empty() {
            return Err(Error::invalid_input("pathway class has no features"));
        }
        for (f, poly) in features.iter().enumerate() {
            if poly.is_empty() {
                return Err(Error::invalid_input(format!("feature {f} has no vertices")));
            }
            if poly.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid_input(format!("feature {f} has non-finite vertices")));
            }
        }
        Ok(Self { name: name.into(), features, tau })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }
}

/// Exact Euclidean distance from a point to a segment.
fn point_to_segment(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return (ap[0] * ap[0] + ap[1] * ap[1]).sqrt();
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let dx = p[0] - (a[0] + t * ab[0]);
    let dy = p[1] - (a[1] + t * ab[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Minimum distance from a point to a polyline (over its segments).
pub fn point_to_polyline(p: &[f64; 2], polyline: &[[f64; 2]]) -> f64 {
    if polyline.len() == 1 {
        return point_to_segment(p, &polyline[0], &polyline[0]);
    }
    polyline
        .windows(2)
        .map(|w| point_to_segment(p, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Closeness scores `v_{i,f} = exp(−dist(s_i, feature_f)/τ)`, one row per
/// node, one column per feature of the class. Entries lie in (0, 1].
pub fn closeness_scores(nodes: &NodeSet, class: &PathwayClass) -> Result<DMatrix<f64>> {
    if class.features.is_empty() {
        return Err(Error::invalid_input("pathway class has no features"));
    }
    let n = nodes.coords.len();
    let mut v = DMatrix::zeros(n, class.features.len());
    for (f, poly) in class.features.iter().enumerate() {
        for i in 0..n {
            let d = point_to_polyline(&nodes.coords[i], poly);
            v[(i, f)] = (-d / class.tau).exp();
        }
    }
    Ok(v)
}

/// Shared-segment connectivity covariate for one class:
/// `κ_{ij} = (1/n_c) Σ_f v_{i,f} v_{j,f}`, in dyad order.
pub fn shared_segment_covariates(v: &DMatrix<f64>, idx: &DyadIndex) -> Result<DVector<f64>> {
    if v.nrows() != idx.n_nodes() {
        return Err(Error::invalid_input("closeness matrix rows must match node count"));
    }
    let n_features = v.ncols() as f64;
    Ok(DVector::from_iterator(
        idx.len(),
        idx.pairs()
            .iter()
            .map(|&(i, j)| v.row(i).dot(&v.row(j)) / n_features),
    ))
}

/// Column standardization to mean 0, sample sd 1. Constant columns map to
/// zeros with scale 1 so downstream algebra stays finite.
pub fn standardize_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let (n, p) = x.shape();
    let mut out = x.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for c in 0..p {
        let col = x.column(c);
        let mean = col.mean();
        let sd = if n > 1 {
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for r in 0..n {
            out[(r, c)] = (x[(r, c)] - mean) / scale;
        }
        means.push(mean);
        scales.push(scale);
    }
    (out, means, scales)
}

/// Radial basis centers and bandwidth in difference space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfSpec {
    /// k centers, each of raw-difference dimension.
    pub centers: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

/// Gaussian RBF features: entry (r, m) = exp(−‖diff_r − center_m‖²/(2h²)).
pub fn rbf_basis(diffs: &DMatrix<f64>, spec: &RbfSpec) -> Result<DMatrix<f64>> {
    if !(spec.bandwidth > 0.0) {
        return Err(Error::invalid_input(format!(
            "RBF bandwidth must be positive, got {}",
            spec.bandwidth
        )));
    }
    let p = diffs.ncols();
    for c in &spec.centers {
        if c.len() != p {
            return Err(Error::invalid_input("RBF center dimension mismatch"));
        }
    }
    let denom = 2.0 * spec.bandwidth * spec.bandwidth;
    let mut out = DMatrix::zeros(diffs.nrows(), spec.centers.len());
    for (m, center) in spec.centers.iter().enumerate() {
        for r in 0..diffs.nrows() {
            let d2: f64 = (0..p).map(|c| (diffs[(r, c)] - center[c]).powi(2)).sum();
            out[(r, m)] = (-d2 / denom).exp();
        }
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits RBF centers by k-means (k-means++ init, Lloyd iterations) on the
/// difference rows; bandwidth = median pairwise center distance. Rows are
/// canonicalized by lexicographic sort before clustering so the result is
/// invariant to input row order.
pub fn fit_rbf_spec(diffs: &DMatrix<f64>, k: usize, seed: u64) -> Result<RbfSpec> {
    let n = diffs.nrows();
    let p = diffs.ncols();
    if k == 0 {
        return Err(Error::invalid_input("need at least one RBF center"));
    }
    if k > n {
        return Err(Error::invalid_input(format!("k={k} centers but only {n} rows")));
    }

    let mut rows: Vec<Vec<f64>> = (0..n).map(|r| diffs.row(r).iter().cloned().collect()).collect();
    rows.sort_by(|a, b| a.partial_cmp(b).expect("finite design rows"));

    if rows.first() == rows.last() && k > 1 {
        return Err(Error::invalid_input("all difference rows identical: centers degenerate"));
    }

    if k == 1 {
        let center: Vec<f64> = (0..p)
            .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n as f64)
            .collect();
        // Median inter-center distance is undefined for one center; fall
        // back to the sd of member distances (floored to stay positive).
        let dists: Vec<f64> = rows.iter().map(|r| sq_dist(r, &center).sqrt()).collect();
        let mean = dists.iter().sum::<f64>() / n as f64;
        let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        let bandwidth = var.sqrt().max(1e-8);
        return Ok(RbfSpec { centers: vec![center], bandwidth });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(rows.choose(&mut rng).expect("nonempty").clone());
    while centers.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|r| centers.iter().map(|c| sq_dist(r, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = rows.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..rows.len())
        };
        centers.push(rows[next].clone());
    }

    // Lloyd iterations.
    let mut inertia = f64::INFINITY;
    for _ in 0..100 {
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        let mut new_inertia = 0.0;
        for r in &rows {
            let (best, d2) = centers
                .iter()
                .enumerate()
                .map(|(c, center)| (c, sq_dist(r, center)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            new_inertia += d2;
            counts[best] += 1;
            for c in 0..p {
                sums[best][c] += r[c];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..p {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            } else {
                // Re-seed an empty cluster at the farthest row.
                let far = rows
                    .iter()
                    .max_by(|a, b| {
                        let da = centers.iter().map(|ce| sq_dist(a, ce)).fold(f64::INFINITY, f64::min);
                        let db = centers.iter().map(|ce| sq_dist(b, ce)).fold(f64::INFINITY, f64::min);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = far.clone();
            }
        }
        let converged =
            inertia.is_finite() && (inertia - new_inertia).abs() < 1e-6 * inertia.max(1e-12);
        inertia = new_inertia;
        if converged {
            break;
        }
    }

    let mut pairwise: Vec<f64> = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            pairwise.push(sq_dist(&centers[a], &centers[b]).sqrt());
        }
    }
    pairwise.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = pairwise.len();
    let bandwidth = if m % 2 == 1 {
        pairwise[m / 2]
    } else {
        0.5 * (pairwise[m / 2 - 1] + pairwise[m / 2])
    };
    if !(bandwidth > 0.0) {
        return Err(Error::invalid_input("degenerate RBF centers (coincident)"));
    }
    Ok(RbfSpec { centers, bandwidth })
}

/// Per-column affine transform applied while assembling the design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// The assembled dyadic design `z_ij = [x̃_ij' κ_ij']'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub env_block: DMatrix<f64>,
    pub conn_block: DMatrix<f64>,
    /// Column concatenation `[env | conn]`, one row per dyad.
    pub combined: DMatrix<f64>,
    /// Transform applied to the combined columns inside this call
    /// (identity for columns passed through untouched).
    pub standardization: Standardization,
}

impl DesignMatrix {
    pub fn n_covariates(&self) -> usize {
        self.combined.ncols()
    }
}

/// Concatenates the environmental and connectivity blocks, optionally
/// standardizing the connectivity columns.
pub fn assemble_design(
    env: &DMatrix<f64>,
    conn: &DMatrix<f64>,
    standardize_connectivity: bool,
) -> Result<DesignMatrix> {
    if env.nrows() != conn.nrows() && env.ncols() > 0 && conn.ncols() > 0 {
        return Err(Error::invalid_input(format!(
            "design blocks disagree: {} vs {} rows",
            env.nrows(),
            conn.nrows()
        )));
    }
    let n = env.nrows().max(conn.nrows());
    let p = env.ncols();
    let c = conn.ncols();

    let (conn_out, conn_means, conn_scales) = if standardize_connectivity && c > 0 {
        standardize_columns(conn)
    } else {
        (conn.clone(), vec![0.0; c], vec![1.0; c])
    };

    let mut combined = DMatrix::zeros(n, p + c);
    combined.view_mut((0, 0), (n, p)).copy_from(env);
    combined.view_mut((0, p), (n, c)).copy_from(&conn_out);
    if combined.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("non-finite entry in assembled design"));
    }

    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    means.extend(conn_means);
    scales.extend(conn_scales);

    Ok(DesignMatrix {
        env_block: env.clone(),
        conn_block: conn_out,
        combined,
        standardization: Standardization { means, scales },
    })
}

/// A fully assembled dataset ready for the sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicData {
    pub node_ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub idx: DyadIndex,
    /// Logit-scale dyadic responses in normative order.
    pub response: DVector<f64>,
    pub design: DesignMatrix,
}

impl DyadicData {
    pub fn new(
        node_ids: Vec<String>,
        coords: Vec<[f64; 2]>,
        response: DVector<f64>,
        design: DesignMatrix,
    ) -> Result<Self> {
        let n = coords.len();
        if node_ids.len() != n {
            return Err(Error::invalid_input("node id/coordinate length mismatch"));
        }
        let idx = DyadIndex::new(n)?;
        if response.len() != idx.len() || design.combined.nrows() != idx.len() {
            return Err(Error::invalid_input(format!(
                "expected {} dyads, got {} responses and {} design rows",
                idx.len(),
                response.len(),
                design.combined.nrows()
            )));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite dyadic response"));
        }
        Ok(Self { node_ids, coords, idx, response, design })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_dyads(&self) -> usize {
        self.idx.len()
    }

    /// Pairwise node distance matrix.
    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.coords.len();
        DMatrix::from_fn(n, n, |i, j| crate::dyad::euclidean(&self.coords[i], &self.coords[j]))
    }
}
