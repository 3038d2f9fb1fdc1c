//! Correlated Gaussian noise on a space-time lattice.
//!
//! Increments are sampled exactly from `N(0, Δt Σ)` with
//! `Σ_ab = f(y_a − y_b)`. The leading eigenvectors of `Σ` stand in for an
//! orthonormal basis of the noise's Hilbert space, which gives the scalar
//! Brownian motions `W_j` that the Wong–Zakai smoothing, the localization
//! events and the Girsanov shift act on.

mod covariance;
mod lattice;
mod path;
mod smoothing;

pub use covariance::{DiagonalRule, LatticeCovariance, ModeBasis};
pub use lattice::{Lattice, NoiseGrid, Region, Stencil};
pub use path::{sample_noise, NoisePath, NoiseSampler};
pub(crate) use path::{decode_f64, with_ext};
pub use smoothing::{
    alpha_threshold, build_smoothed, dyadic_increments, girsanov_shift, ht_norm, ht_norm_localized,
    localization_indicator, localization_last_interval, localization_level, localization_probability,
    ControlH, HtElement, SmoothedNoise,
};
