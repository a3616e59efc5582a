//! Numerical oracles that check the analytic identities from the outside.
//!
//! Nothing here depends on [`crate::identities`]: the difference oracle sees
//! only a scalar function, and the Monte Carlo oracle only the channel
//! likelihoods.

mod curve;
mod diff;
mod mc;

pub use curve::{divergence_at, divergence_curve, divergence_curve_exec, divergence_on_range};
pub use diff::{central_diff, DiffConfig, DiffEstimate};
pub use mc::{mc_posterior_mean, mc_posterior_mean_exec, McConfig, McEstimate, MC_CHUNK};
