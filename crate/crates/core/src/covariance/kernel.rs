use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dyad::euclidean;
use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Spatial correlation kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// Matérn 3/2: `(1 + √3 d/φ) exp(−√3 d/φ)`.
    Matern32,
    /// Exponential decay: `exp(−d/φ)`.
    Exponential,
}

/// A kernel family together with its spatial range φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub range: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, range: f64) -> Result<Self> {
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::invalid_input(format!(
                "kernel range must be positive and finite, got {range}"
            )));
        }
        Ok(Self { family, range })
    }

    pub fn matern32(range: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern32, range)
    }

    pub fn exponential(range: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, range)
    }

    /// Correlation at distance `d ≥ 0` (not validated; see [`kernel_value`]).
    #[inline]
    pub(crate) fn eval(&self, d: f64) -> f64 {
        match self.family {
            KernelFamily::Matern32 => {
                let u = SQRT3 * d / self.range;
                (1.0 + u) * (-u).exp()
            }
            KernelFamily::Exponential => (-d / self.range).exp(),
        }
    }
}

/// Correlation at distance `d`; errors on negative distance.
pub fn kernel_value(d: f64, spec: &KernelSpec) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::invalid_input(format!("negative distance {d}")));
    }
    Ok(spec.eval(d))
}

/// Node correlation matrix from pairwise Euclidean distances: symmetric with
/// unit diagonal. Duplicate coordinates are permitted; the resulting rank
/// deficiency is handled by jitter downstream.
pub fn node_correlation_matrix(coords: &[[f64; 2]], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if coords.is_empty() {
        return Err(Error::invalid_input("need at least one coordinate"));
    }
    let n = coords.len();
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&coords[i], &coords[j]);
            if !d.is_finite() {
                return Err(Error::invalid_input("non-finite pairwise distance"));
            }
            let v = spec.eval(d);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
