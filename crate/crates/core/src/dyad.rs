//! Node and dyad bookkeeping: the ordered `i < j` dyad enumeration, the signed
//! node-to-dyad incidence map, and the logit-scale dyadic response.
//!
//! The lexicographic order of `(i, j)` pairs produced by [`DyadIndex::new`] is
//! normative: every length-`N` vector in this crate follows it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatially referenced nodes with their environmental covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSet {
    /// External node identifiers, preserved in all serialized output.
    pub ids: Vec<String>,
    /// Planar coordinates (projected units), one per node.
    pub coords: Vec<[f64; 2]>,
    /// Environmental covariates, one row per node.
    pub covariates: DMatrix<f64>,
    /// Covariate column names.
    pub covariate_names: Vec<String>,
}

impl NodeSet {
    pub fn new(
        ids: Vec<String>,
        coords: Vec<[f64; 2]>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = ids.len();
        if coords.len() != n || covariates.nrows() != n {
            return Err(Error::invalid_input(format!(
                "node set shape mismatch: {} ids, {} coords, {} covariate rows",
                n,
                coords.len(),
                covariates.nrows()
            )));
        }
        if covariates.ncols() != covariate_names.len() {
            return Err(Error::invalid_input("covariate name count mismatch"));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid_input(format!("duplicate node id '{id}'")));
            }
        }
        for c in &coords {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(Error::invalid_input("non-finite node coordinate"));
            }
        }
        Ok(Self {
            ids,
            coords,
            covariates,
            covariate_names,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Dense matrix of pairwise Euclidean distances.
    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| euclidean(&self.coords[i], &self.coords[j]))
    }
}

pub(crate) fn euclidean(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// The ordered dyad enumeration for `n` nodes: all pairs `(i, j)` with
/// `i < j` in lexicographic order, together with the signed incidence map
/// from node space to dyad space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadIndex {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl DyadIndex {
    /// Enumerates all `n choose 2` dyads. Fails for `n < 2`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid_input(format!(
                "dyad index needs at least 2 nodes, got {n}"
            )));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        Ok(Self { n, pairs })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Number of dyads, `n (n - 1) / 2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Position of dyad `(i, j)` (with `i < j`) in the normative order.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        if i >= j || j >= self.n {
            return None;
        }
        // Row i starts after sum_{k<i} (n-1-k) pairs.
        Some(i * self.n - i * (i + 1) / 2 + (j - i - 1))
    }

    /// Dense signed incidence matrix: row for dyad `(i, j)` has −1 at `i`
    /// and +1 at `j`. Mostly useful for tests; prefer
    /// [`pairwise_difference`] for applying it.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.pairs.len(), self.n);
        for (row, &(i, j)) in self.pairs.iter().enumerate() {
            m[(row, i)] = -1.0;
            m[(row, j)] = 1.0;
        }
        m
    }

    /// Adjoint of the incidence map: accumulates a dyad vector back onto
    /// nodes (`Mᵀ y`).
    pub fn incidence_transpose_apply(&self, dyad_values: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (row, &(i, j)) in self.pairs.iter().enumerate() {
            out[i] -= dyad_values[row];
            out[j] += dyad_values[row];
        }
        out
    }
}

/// Signed pairwise differences: entry for dyad `(i, j)` is
/// `node_values[j] − node_values[i]`.
pub fn pairwise_difference(node_values: &DVector<f64>, idx: &DyadIndex) -> Result<DVector<f64>> {
    if node_values.len() != idx.n_nodes() {
        return Err(Error::invalid_input(format!(
            "expected {} node values, got {}",
            idx.n_nodes(),
            node_values.len()
        )));
    }
    Ok(DVector::from_iterator(
        idx.len(),
        idx.pairs().iter().map(|&(i, j)| node_values[j] - node_values[i]),
    ))
}

/// Columnwise [`pairwise_difference`] over a node-by-covariate matrix.
pub fn pairwise_difference_matrix(node_values: &DMatrix<f64>, idx: &DyadIndex) -> Result<DMatrix<f64>> {
    if node_values.nrows() != idx.n_nodes() {
        return Err(Error::invalid_input(format!(
            "expected {} node rows, got {}",
            idx.n_nodes(),
            node_values.nrows()
        )));
    }
    let mut out = DMatrix::zeros(idx.len(), node_values.ncols());
    for (row, &(i, j)) in idx.pairs().iter().enumerate() {
        for c in 0..node_values.ncols() {
            out[(row, c)] = node_values[(j, c)] - node_values[(i, c)];
        }
    }
    Ok(out)
}

/// Logit of the continuity-corrected mismatch proportion
/// `p = (d + 0.5) / (M + 1)`. Always finite for `0 ≤ d ≤ M`.
pub fn dyadic_response(d: u64, m: u64) -> Result<f64> {
    if m < 1 {
        return Err(Error::invalid_input("comparable count M must be >= 1"));
    }
    if d > m {
        return Err(Error::invalid_input(format!(
            "mismatch count d={d} exceeds comparable count M={m}"
        )));
    }
    let p = (d as f64 + 0.5) / (m as f64 + 1.0);
    Ok((p / (1.0 - p)).ln())
}

/// Dyadic responses on the logit scale, optionally carrying the raw counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicResponse {
    pub values: DVector<f64>,
    pub mismatches: Option<Vec<u64>>,
    pub comparable: Option<Vec<u64>>,
}

impl DyadicResponse {
    pub fn from_values(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite dyadic response"));
        }
        Ok(Self {
            values,
            mismatches: None,
            comparable: None,
        })
    }

    /// Builds responses from per-dyad mismatch and comparable counts.
    pub fn from_counts(mismatches: Vec<u64>, comparable: Vec<u64>) -> Result<Self> {
        if mismatches.len() != comparable.len() {
            return Err(Error::invalid_input("count vector length mismatch"));
        }
        let mut values = DVector::zeros(mismatches.len());
        for (k, (&d, &m)) in mismatches.iter().zip(&comparable).enumerate() {
            values[k] = dyadic_response(d, m)?;
        }
        Ok(Self {
            values,
            mismatches: Some(mismatches),
            comparable: Some(comparable),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}
