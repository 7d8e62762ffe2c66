//! Slow reference implementations used to validate the fast covariance code.
//! Everything here is written for clarity, not speed, and takes a different
//! computational route than the production code it checks.

use nalgebra::DMatrix;

use crate::dyad::DyadIndex;

/// Literal entrywise evaluation of the product covariance.
pub fn brute_force_dyadic_covariance(k: &DMatrix<f64>, idx: &DyadIndex) -> DMatrix<f64> {
    let pairs = idx.pairs();
    DMatrix::from_fn(pairs.len(), pairs.len(), |a, b| {
        let (i, j) = pairs[a];
        let (ii, jj) = pairs[b];
        k[(i, ii)] * k[(j, jj)] + k[(i, jj)] * k[(j, ii)]
    })
}

/// Commutation matrix `H` of order `n`: `H vec(A) = vec(Aᵀ)`.
pub fn commutation_matrix(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            // vec index of (i,j) is j*n + i (column-major).
            h[(i * n + j, j * n + i)] = 1.0;
        }
    }
    h
}

/// Independent derivation of the dyadic covariance through the symmetrized
/// Kronecker operator: the covariance of `vec(S)` for a symmetric matrix
/// field with `cov(vec) = (K ⊗ K)(I + H)`, restricted to the `i < j` entries.
pub fn kronecker_dyadic_covariance(k: &DMatrix<f64>, idx: &DyadIndex) -> DMatrix<f64> {
    let n = idx.n_nodes();
    let kk = k.kronecker(k);
    let full = &kk * (DMatrix::identity(n * n, n * n) + commutation_matrix(n));
    let pairs = idx.pairs();
    DMatrix::from_fn(pairs.len(), pairs.len(), |a, b| {
        let (i, j) = pairs[a];
        let (ii, jj) = pairs[b];
        full[(j * n + i, jj * n + ii)]
    })
}
