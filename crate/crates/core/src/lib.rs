//! Kernel estimation of the limiting spectral density of sample covariance
//! matrices, and numerical verification of its central limit theorems.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`ensembles`] | Draw A_n = (1/n) T^{1/2} X Xᵀ T^{1/2} and its eigenvalues |
//! | [`spectral_law`] | Companion Stieltjes transform, support, and density of F^{c,H} |
//! | [`kernel`] | Kernels and their admissibility checks |
//! | [`estimation`] | Kernel estimators f_n, F_n and their smoothed targets |
//! | [`asymptotics`] | CLT variance σ², bias term, MISE and optimal bandwidth |
//! | [`clt`] | Monte Carlo CLT experiments and contour condition scans |

pub mod asymptotics;
pub mod clt;
pub mod ensembles;
pub mod error;
pub mod estimation;
pub mod kernel;
pub mod quadrature;
pub mod spectral_law;

pub use error::{Error, Result};
