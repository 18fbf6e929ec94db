//! Independent verification engines: direct Monte Carlo simulation of the
//! SPDE, backward stochastic characteristics with the Feynman–Kac weight,
//! the Krylov–Veretennikov pathwise check and closed-form Fourier modes.

mod characteristics;
mod fourier;
mod monte_carlo;
mod paths;
mod stats;

pub use characteristics::{
    feynman_kac_estimate, kv_pathwise_check, residual_factor, simulate_characteristics, BackwardQuadrature,
    CharacteristicOptions, CharacteristicPoint, KvReport,
};
pub use fourier::{exact_fourier_mode, FourierMode};
pub use monte_carlo::{mc_spde, McOptions, MomentEstimate};
pub use paths::PathBundle;
pub use stats::{ks_test_normal, median, normal_cdf, pairwise_sum, EstimatorResult, KsResult, KS_SIGNIFICANCE};
