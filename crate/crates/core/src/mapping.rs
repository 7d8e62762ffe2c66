//! Grid-based posterior map products: predicted dissimilarity surfaces over a
//! regular lattice, finite-difference vector fields with log gradient
//! magnitudes, DSVC z-score aggregation, and node-level pathway slopes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{gp_conditional, node_correlation_matrix, DyadicGp, KernelSpec};
use crate::design::{point_to_polyline, rbf_basis, PathwayClass, RbfSpec, Standardization};
use crate::design::DyadicData;
use crate::error::{Error, Result};
use crate::evaluation::quantile;
use crate::sampler::{ChainOutput, PriorConfig};

/// Floor for the log gradient magnitude on exactly flat fields.
const LOG_GRAD_FLOOR: f64 = 1e-300;
/// Floor for posterior sds in the z-score aggregation.
const SD_FLOOR: f64 = 1e-12;

/// A regular lattice over a bounding box, with optional user-supplied
/// covariate values at each grid node (already on the model scale).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    /// Spacing in x and y.
    pub sx: f64,
    pub sy: f64,
    /// Row-major node coordinates: node `iy * nx + ix`.
    pub coords: Vec<[f64; 2]>,
    /// Node-level covariates (n_grid × p_env), when env effects are mapped.
    pub covariates: Option<DMatrix<f64>>,
}

impl GridSpec {
    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    fn split(&self, g: usize) -> (usize, usize) {
        (g % self.nx, g / self.nx)
    }

    /// Cardinal neighbors in (W, E, S, N) order where they exist.
    pub fn neighbors(&self, g: usize) -> Vec<usize> {
        let (ix, iy) = self.split(g);
        let mut out = Vec::with_capacity(4);
        if ix > 0 {
            out.push(g - 1);
        }
        if ix + 1 < self.nx {
            out.push(g + 1);
        }
        if iy > 0 {
            out.push(g - self.nx);
        }
        if iy + 1 < self.ny {
            out.push(g + self.nx);
        }
        out
    }

    pub fn is_interior(&self, g: usize) -> bool {
        let (ix, iy) = self.split(g);
        ix > 0 && ix + 1 < self.nx && iy > 0 && iy + 1 < self.ny
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|g| self.is_interior(*g)).collect()
    }
}

/// Builds a regular grid over `bbox = [xmin, ymin, xmax, ymax]`.
pub fn build_grid(
    bbox: [f64; 4],
    nx: usize,
    ny: usize,
    covariates: Option<DMatrix<f64>>,
) -> Result<GridSpec> {
    let [xmin, ymin, xmax, ymax] = bbox;
    if !(xmax > xmin) || !(ymax > ymin) {
        return Err(Error::invalid_input("degenerate bounding box"));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::invalid_input("grid needs nx, ny >= 3"));
    }
    if let Some(c) = &covariates {
        if c.nrows() != nx * ny {
            return Err(Error::invalid_input(format!(
                "grid covariates have {} rows, expected {}",
                c.nrows(),
                nx * ny
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite grid covariate"));
        }
    }
    let sx = (xmax - xmin) / (nx - 1) as f64;
    let sy = (ymax - ymin) / (ny - 1) as f64;
    let mut coords = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            coords.push([xmin + ix as f64 * sx, ymin + iy as f64 * sy]);
        }
    }
    Ok(GridSpec { nx, ny, origin: [xmin, ymin], sx, sy, coords, covariates })
}

/// Undirected lattice edges (canonical direction: lower node index first).
#[derive(Debug, Clone)]
pub struct GridEdges {
    pub pairs: Vec<(usize, usize)>,
    lookup: HashMap<(usize, usize), usize>,
}

impl GridEdges {
    pub fn from_grid(grid: &GridSpec) -> Self {
        let mut pairs = Vec::new();
        for g in 0..grid.n_nodes() {
            for nb in grid.neighbors(g) {
                if nb > g {
                    pairs.push((g, nb));
                }
            }
        }
        let lookup = pairs.iter().enumerate().map(|(e, &p)| (p, e)).collect();
        Self { pairs, lookup }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }
}

/// Per-draw grid fields: everything needed to evaluate the mean surface.
#[derive(Debug, Clone)]
pub struct DrawFields {
    pub alpha: f64,
    pub beta: DVector<f64>,
    /// Spatial random effect at each grid node.
    pub eta: DVector<f64>,
    /// Predicted DSVC row per canonical grid edge (n_edges × p).
    pub delta: DMatrix<f64>,
}

/// Caps and thinning for map prediction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapOpts {
    /// Keep every `draw_step`th retained draw.
    pub draw_step: usize,
    /// Refuse grids whose edge count exceeds this cap.
    pub max_grid_dyads: usize,
}

impl Default for MapOpts {
    fn default() -> Self {
        Self { draw_step: 1, max_grid_dyads: 20_000 }
    }
}

/// Predicts the latent fields at the grid for each retained draw: η by GP
/// conditional under its fitted kernel, and per-factor dyadic GP conditionals
/// for the grid-edge rows of Δ = WC'.
pub fn predict_latent_fields(
    chain: &ChainOutput,
    data: &DyadicData,
    grid: &GridSpec,
    edges: &GridEdges,
    prior: &PriorConfig,
    opts: &MapOpts,
) -> Result<Vec<DrawFields>> {
    if opts.draw_step == 0 {
        return Err(Error::invalid_input("draw_step must be >= 1"));
    }
    if edges.len() > opts.max_grid_dyads {
        return Err(Error::SizeLimit(format!(
            "{} grid dyads exceed the cap of {}",
            edges.len(),
            opts.max_grid_dyads
        )));
    }
    let draws = &chain.draws;
    if draws.alpha.is_empty() {
        return Err(Error::invalid_input("chain holds no retained draws"));
    }
    let with_factors = chain.meta.schedule.variant.includes_factors();
    if with_factors && draws.w.len() != draws.alpha.len() {
        return Err(Error::invalid_input(
            "mapping a factor variant needs per-draw factors (store_factors)",
        ));
    }
    let p = chain.meta.n_covariates;
    let q = chain.meta.q;
    let n_obs = data.n_nodes();
    let obs_idx = &data.idx;

    let mut out = Vec::new();
    for it in (0..draws.alpha.len()).step_by(opts.draw_step) {
        // η at grid nodes from the node-level GP.
        let eta_obs = DVector::from_column_slice(&draws.eta[it]);
        let spec = KernelSpec::new(prior.eta_kernel, draws.phi_eta[it])?;
        let eta = gp_conditional(&data.coords, &eta_obs, &grid.coords, &spec)?;

        // Grid-edge Δ rows from the per-factor dyadic GP conditionals.
        let delta = if with_factors {
            let w_obs = DMatrix::from_row_slice(obs_idx.len(), q, &draws.w[it]);
            let c_load = DMatrix::from_row_slice(p, q, &draws.c_load[it]);
            let mut w_grid = DMatrix::zeros(edges.len(), q);
            for fq in 0..q {
                let spec = KernelSpec::new(prior.factor_kernel, draws.phi_q[it][fq])?;
                let gp = DyadicGp::new(node_correlation_matrix(&data.coords, &spec)?)?;
                // x = Σ_obs⁻¹ w_q, spread into a symmetric node matrix S so
                // that the cross-covariance product is (K_c S K_c')_{ab}.
                let x = gp.inv_apply(&w_obs.column(fq).into_owned(), obs_idx)?;
                let mut s = DMatrix::zeros(n_obs, n_obs);
                for (row, &(i, j)) in obs_idx.pairs().iter().enumerate() {
                    s[(i, j)] = x[row];
                    s[(j, i)] = x[row];
                }
                let mut kc = DMatrix::zeros(grid.n_nodes(), n_obs);
                for (g, gc) in grid.coords.iter().enumerate() {
                    for (o, oc) in data.coords.iter().enumerate() {
                        kc[(g, o)] = spec.eval(crate::dyad::euclidean(gc, oc));
                    }
                }
                let m = &kc * s * kc.transpose();
                for (e, &(a, b)) in edges.pairs.iter().enumerate() {
                    w_grid[(e, fq)] = m[(a, b)];
                }
            }
            &w_grid * c_load.transpose()
        } else {
            DMatrix::zeros(edges.len(), p)
        };

        out.push(DrawFields {
            alpha: draws.alpha[it],
            beta: DVector::from_column_slice(&draws.beta[it]),
            eta,
            delta,
        });
    }
    Ok(out)
}

/// Assembles the grid-edge design rows `z = [h(x_{g'} − x_g)' κ']'` in both
/// directions of each canonical edge, applying the fit's RBF transform (if
/// any) and column standardization. `p_active` truncates to the design
/// columns the fitted variant used.
pub fn grid_edge_design(
    grid: &GridSpec,
    edges: &GridEdges,
    pathways: &[PathwayClass],
    rbf: Option<&RbfSpec>,
    standardization: &Standardization,
    p_active: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p_env_raw = grid.covariates.as_ref().map_or(0, DMatrix::ncols);
    if p_env_raw == 0 && p_active > pathways.len() {
        return Err(Error::invalid_input(
            "grid covariates required when env effects are mapped",
        ));
    }
    // Signed covariate differences per directed edge.
    let diffs_fwd = DMatrix::from_fn(edges.len(), p_env_raw, |e, c| {
        let (a, b) = edges.pairs[e];
        let x = grid.covariates.as_ref().unwrap();
        x[(b, c)] - x[(a, c)]
    });
    let (env_fwd, env_bwd) = match rbf {
        Some(spec) => (rbf_basis(&diffs_fwd, spec)?, rbf_basis(&(-&diffs_fwd), spec)?),
        None => {
            let bwd = -&diffs_fwd;
            (diffs_fwd, bwd)
        }
    };

    // Connectivity covariates are symmetric in direction.
    let mut kappa = DMatrix::zeros(edges.len(), pathways.len());
    for (c, class) in pathways.iter().enumerate() {
        let nf = class.n_features() as f64;
        let v: Vec<Vec<f64>> = grid
            .coords
            .iter()
            .map(|p| {
                class
                    .features
                    .iter()
                    .map(|poly| (-point_to_polyline(p, poly) / class.tau).exp())
                    .collect()
            })
            .collect();
        for (e, &(a, b)) in edges.pairs.iter().enumerate() {
            kappa[(e, c)] = v[a].iter().zip(&v[b]).map(|(x, y)| x * y).sum::<f64>() / nf;
        }
    }

    let p_full = env_fwd.ncols() + kappa.ncols();
    if standardization.means.len() != p_full {
        return Err(Error::invalid_input(format!(
            "standardization has {} columns, grid design has {p_full}",
            standardization.means.len()
        )));
    }
    if p_active > p_full {
        return Err(Error::invalid_input("p_active exceeds grid design columns"));
    }
    let assemble = |env: &DMatrix<f64>| {
        let mut z = DMatrix::zeros(edges.len(), p_active);
        for e in 0..edges.len() {
            for c in 0..p_active {
                let raw = if c < env.ncols() { env[(e, c)] } else { kappa[(e, c - env.ncols())] };
                z[(e, c)] = (raw - standardization.means[c]) / standardization.scales[c];
            }
        }
        z
    };
    Ok((assemble(&env_fwd), assemble(&env_bwd)))
}

/// Posterior mean dissimilarity per directed grid edge. The intercept is
/// kept separate so that differencing two directions cancels it bit-exactly.
#[derive(Debug, Clone)]
pub struct MuSurface {
    /// Posterior mean intercept, shared by every edge.
    pub alpha_mean: f64,
    /// Mean of μ − α along the canonical direction (low → high node index).
    pub forward: DVector<f64>,
    /// Mean of μ − α against it.
    pub backward: DVector<f64>,
}

impl MuSurface {
    /// μ̄ for the ordered pair (tail, head); the pair must be a lattice edge.
    pub fn mu(&self, edges: &GridEdges, tail: usize, head: usize) -> Option<f64> {
        Some(self.alpha_mean + self.centered(edges, tail, head)?)
    }

    /// μ̄ − ᾱ for the ordered pair, the quantity finite differences use.
    pub fn centered(&self, edges: &GridEdges, tail: usize, head: usize) -> Option<f64> {
        let e = edges.position(tail, head)?;
        Some(if tail < head { self.forward[e] } else { self.backward[e] })
    }
}

/// Averages `μ = α + z'(β + Δ) + (η_head − η_tail)` over the draws.
pub fn dyadic_mean_surface(
    fields: &[DrawFields],
    edges: &GridEdges,
    z_fwd: &DMatrix<f64>,
    z_bwd: &DMatrix<f64>,
) -> Result<MuSurface> {
    if fields.is_empty() {
        return Err(Error::invalid_input("no draw fields"));
    }
    let ne = edges.len();
    let mut alpha_mean = 0.0;
    let mut forward = DVector::zeros(ne);
    let mut backward = DVector::zeros(ne);
    for f in fields {
        alpha_mean += f.alpha;
        for (e, &(a, b)) in edges.pairs.iter().enumerate() {
            let coef = &f.beta + f.delta.row(e).transpose();
            let d_eta = f.eta[b] - f.eta[a];
            forward[e] += z_fwd.row(e).transpose().dot(&coef) + d_eta;
            backward[e] += z_bwd.row(e).transpose().dot(&coef) - d_eta;
        }
    }
    alpha_mean /= fields.len() as f64;
    forward /= fields.len() as f64;
    backward /= fields.len() as f64;
    Ok(MuSurface { alpha_mean, forward, backward })
}

/// Finite-difference vector field on interior nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorField {
    /// Interior node indices, parallel to the component vectors.
    pub nodes: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub log_grad: Vec<f64>,
}

/// `u_g = (μ(g,E) − μ(g,W))/s_x`, `v_g = (μ(g,N) − μ(g,S))/s_y`, and the log
/// gradient magnitude (floored for exactly flat fields).
pub fn vector_field(surface: &MuSurface, grid: &GridSpec, edges: &GridEdges) -> Result<VectorField> {
    let nodes = grid.interior_nodes();
    let mut u = Vec::with_capacity(nodes.len());
    let mut v = Vec::with_capacity(nodes.len());
    let mut log_grad = Vec::with_capacity(nodes.len());
    for &g in &nodes {
        // The intercept cancels in the differences; use the centered surface
        // so the cancellation is bit-exact.
        let mu = |head: usize| {
            surface
                .centered(edges, g, head)
                .ok_or_else(|| Error::InvalidState("missing lattice edge".into()))
        };
        let ug = (mu(g + 1)? - mu(g - 1)?) / grid.sx;
        let vg = (mu(g + grid.nx)? - mu(g - grid.nx)?) / grid.sy;
        u.push(ug);
        v.push(vg);
        log_grad.push(ug.hypot(vg).max(LOG_GRAD_FLOOR).ln());
    }
    Ok(VectorField { nodes, u, v, log_grad })
}

/// Per-edge posterior mean and sd of Δ across the draw fields.
pub fn delta_edge_summary(fields: &[DrawFields]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if fields.is_empty() {
        return Err(Error::invalid_input("no draw fields"));
    }
    let (ne, p) = fields[0].delta.shape();
    let k = fields.len() as f64;
    let mut mean = DMatrix::zeros(ne, p);
    let mut sq = DMatrix::zeros(ne, p);
    for f in fields {
        mean += &f.delta;
        sq += f.delta.component_mul(&f.delta);
    }
    mean /= k;
    let sd = (sq / k - mean.component_mul(&mean)).map(|v| v.max(0.0).sqrt());
    Ok((mean, sd))
}

/// Average absolute DSVC z-score per grid node:
/// `z̄_g = (1/(deg(g) p)) Σ_{g'} Σ_l |mean/sd|` over the node's edges.
pub fn dsvc_zscore_map(
    delta_mean: &DMatrix<f64>,
    delta_sd: &DMatrix<f64>,
    grid: &GridSpec,
    edges: &GridEdges,
) -> Result<Vec<f64>> {
    if delta_mean.shape() != delta_sd.shape() || delta_mean.nrows() != edges.len() {
        return Err(Error::invalid_input("Δ summaries must align with the edges"));
    }
    let p = delta_mean.ncols();
    let mut out = Vec::with_capacity(grid.n_nodes());
    for g in 0..grid.n_nodes() {
        let nbrs = grid.neighbors(g);
        let mut acc = 0.0;
        for &nb in &nbrs {
            let e = edges.position(g, nb).expect("neighbor is a lattice edge");
            for l in 0..p {
                acc += (delta_mean[(e, l)] / delta_sd[(e, l)].max(SD_FLOOR)).abs();
            }
        }
        out.push(acc / (nbrs.len() * p) as f64);
    }
    Ok(out)
}

/// Posterior summaries of the node-level slope for one pathway class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaMap {
    /// Design column of the class coefficient γ_c.
    pub class_col: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Domain-wide per-draw averages of θ over grid nodes.
    pub global_draws: Vec<f64>,
    pub global_mean: f64,
}

/// `θ_{g,c} = γ_c + (1/deg(g)) Σ_{g'} Δ_{(g,g'),c}` per draw, summarized with
/// equal-tailed 95% intervals and a domain-wide average.
pub fn node_level_slope_map(
    fields: &[DrawFields],
    grid: &GridSpec,
    edges: &GridEdges,
    class_col: usize,
) -> Result<ThetaMap> {
    if fields.is_empty() {
        return Err(Error::invalid_input("no draw fields"));
    }
    if class_col >= fields[0].beta.len() {
        return Err(Error::invalid_input("class column outside the design"));
    }
    let n_g = grid.n_nodes();
    let mut per_node: Vec<Vec<f64>> = vec![Vec::with_capacity(fields.len()); n_g];
    let mut global_draws = Vec::with_capacity(fields.len());
    for f in fields {
        let mut total = 0.0;
        for g in 0..n_g {
            let nbrs = grid.neighbors(g);
            let mut acc = 0.0;
            for &nb in &nbrs {
                let e = edges.position(g, nb).expect("neighbor is a lattice edge");
                acc += f.delta[(e, class_col)];
            }
            let theta = f.beta[class_col] + acc / nbrs.len() as f64;
            per_node[g].push(theta);
            total += theta;
        }
        global_draws.push(total / n_g as f64);
    }
    let mean: Vec<f64> = per_node.iter().map(|d| d.iter().sum::<f64>() / d.len() as f64).collect();
    let lower: Vec<f64> = per_node.iter().map(|d| quantile(d, 0.025)).collect();
    let upper: Vec<f64> = per_node.iter().map(|d| quantile(d, 0.975)).collect();
    let global_mean = global_draws.iter().sum::<f64>() / global_draws.len() as f64;
    Ok(ThetaMap { class_col, mean, lower, upper, global_draws, global_mean })
}

/// The full bundle of map products for one fitted chain.
#[derive(Debug, Clone)]
pub struct MapProducts {
    pub grid: GridSpec,
    pub vectors: VectorField,
    pub zbar: Vec<f64>,
    pub theta: Vec<ThetaMap>,
}
