//! Numerical library for the nth-order fractional Brownian motion: kernel
//! construction, exact and FFT-based simulation, Wiener-integral transfer,
//! conditional prediction, and equivalence-in-law likelihood ratios.

mod cheb;
mod error;
mod linalg;

pub mod covariance;
pub mod equivalence;
pub mod grid;
pub mod kernels;
pub mod prediction;
pub mod quad;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{Grid, HurstOrder};
pub use rng::RngStream;

pub use covariance::{fbm_cov, nfbm_cov_closed, nfbm_cov_quadrature, nfbm_var, NormalizationMode};
pub use kernels::{invert_kernel_matrix, kernel_cell_averages, mg_kernel, nfbm_kernel, KernelMatrix};
pub use simulation::{
    differentiate_path, integrate_path, simulate_cholesky, simulate_fgn_fft, simulate_volterra,
    simulate_volterra_from_increments, SamplePath, SimMethod,
};

pub use linalg::cholesky_with_jitter;
