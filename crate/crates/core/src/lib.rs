//! Monte Carlo laboratory for the three-dimensional stochastic wave equation
//! driven by Gaussian noise that is white in time and spatially correlated.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: covariance kernels and their regularity integrals,
//! - [`noise`]: lattice noise paths, Wong–Zakai smoothing, localization and
//!   Girsanov shifts,
//! - [`wavekernel`]: the fundamental solution as sphere quadrature,
//! - [`solver`]: mild-form solvers (explicit recursion and Picard scheme),
//! - [`holder`]: Hölder norms, moduli of continuity and exponent fits,
//! - [`harness`]: experiment configuration, ensembles and reporting.

pub mod error;
pub mod harness;
pub mod holder;
pub mod kernels;
pub mod noise;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod wavekernel;

pub use error::{Error, Result};
