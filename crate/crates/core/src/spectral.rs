//! Spectral-side constants for the Riesz kernel.
//!
//! With `f(x) = |x|^{-β}` the spectral measure has density
//! `c_β |ξ|^{β-3}` (Fourier convention `φ̂(ξ) = ∫ e^{-iξ·x} φ(x) dx`), and the
//! Fourier transform of `G(s)` is `sin(s|ξ|)/|ξ|`. The variance of the
//! additive linear solution at a point is then
//! `K_β ∫_0^t s^{2-β} ds = K_β t^{3-β}/(3-β)`, where
//! `K_β = (2π)^{-3} c_β 4π ∫_0^∞ u^{β-3} sin²u du`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_from_origin, Tolerance};

/// Number of half-periods of `sin²` integrated numerically before the tail
/// is summed analytically.
const PERIODS: usize = 400;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Parameter(format!("Riesz exponent must lie in (0, 2), got {beta}")));
    }
    Ok(())
}

/// Fourier-transform constant: `∫ |x|^{-β} e^{-iξ·x} dx = c_β |ξ|^{β-3}`.
pub fn riesz_fourier_constant(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(PI.powf(1.5) * 2f64.powf(3.0 - beta) * gamma((3.0 - beta) / 2.0) / gamma(beta / 2.0))
}

/// `∫_0^∞ u^{β-3} sin²u du` by quadrature on `[0, Nπ]` plus the mean tail
/// `(Nπ)^{β-2}/(2(2-β))`; the oscillating remainder is `O((Nπ)^{β-4})`.
pub fn sin_squared_moment(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let g = |u: f64| u.powf(beta - 3.0) * u.sin().powi(2);
    let tol = Tolerance::new(1e-14, 1e-12);
    let mut total = integrate_from_origin(g, PI, &[], tol)?.value;
    for k in 1..PERIODS {
        total += integrate(g, k as f64 * PI, (k + 1) as f64 * PI, &[], tol)?.value;
    }
    let upper = PERIODS as f64 * PI;
    Ok(total + upper.powf(beta - 2.0) / (2.0 * (2.0 - beta)))
}

/// `K_β` such that `Var X(t, x) = K_β t^{3-β}/(3-β)` for the additive linear
/// equation with zero initial data.
pub fn riesz_wave_constant(beta: f64) -> Result<f64> {
    let c = riesz_fourier_constant(beta)?;
    Ok(c * 4.0 * PI * sin_squared_moment(beta)? / (2.0 * PI).powi(3))
}

/// `K_β t^{3-β}/(3-β)`.
pub fn additive_variance(beta: f64, t: f64) -> Result<f64> {
    Ok(riesz_wave_constant(beta)? * t.powf(3.0 - beta) / (3.0 - beta))
}
