//! The blocked Gibbs–Metropolis sampler: conjugate regression and variance
//! updates, the U-subspace spatial random-effect block, slice-sampled spatial
//! ranges, whitened joint factor moves with exact conditional draws, and
//! global-local shrinkage on the loadings.

mod chain;
mod draws;
mod eta;
mod factors;
mod loadings;
mod prior;
mod regression;
mod slice;
pub(crate) mod state;

pub use chain::{run_chain, ChainMeta, ChainOutput, Draws, ModelVariant, Schedule, StorageOpts};
pub use eta::{gamma_conditional_moments, update_eta_block};
pub use factors::{update_factor_block, FactorStats, FactorUpdateOpts};
pub use loadings::{loading_conditional_moments, update_loadings_block};
pub use prior::PriorConfig;
pub use regression::{regression_conditional_moments, update_regression_block};
pub use slice::slice_sample_log_range;
pub use state::{helmert_basis, init_state, recenter_rescale, ModelState, Workspace};
