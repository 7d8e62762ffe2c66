//! Spatial kernels, node correlation matrices, the dyadic covariance over
//! source-destination pairs, Cholesky factorization with a jitter ladder, and
//! Gaussian-process conditional prediction.

mod chol;
mod dyadic;
mod gp;
mod kernel;
pub mod oracle;

pub use chol::{chol_lower, cholesky_psd, CholPsd};
pub use dyadic::{dyadic_covariance, DyadicCovariance, DyadicGp};
pub use gp::gp_conditional;
pub use kernel::{kernel_value, node_correlation_matrix, KernelFamily, KernelSpec};
