use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::covariance::ModeBasis;
use super::path::NoisePath;
use crate::error::{Error, Result};

/// Smallest admissible localization constant, `√(2 ln 2)`.
pub fn alpha_threshold() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

fn check_level(path: &NoisePath, n: u32) -> Result<usize> {
    if n == 0 {
        return Err(Error::Parameter("level n must be at least 1".into()));
    }
    if n as usize > path.num_modes() {
        return Err(Error::Parameter(format!(
            "level {n} needs at least {n} eigenmodes, path has {}",
            path.num_modes()
        )));
    }
    path.grid.steps_per_dyadic(n)
}

/// `W_j(Δ_i)` for `j < n` and the `2ⁿ` dyadic intervals, mode-major.
pub fn dyadic_increments(path: &NoisePath, n: u32) -> Result<Vec<f64>> {
    let per = check_level(path, n)?;
    let parts = 1usize << n;
    let mut out = Vec::with_capacity(n as usize * parts);
    for j in 0..n as usize {
        let mode = path.mode(j);
        out.extend((0..parts).map(|i| mode[i * per..(i + 1) * per].iter().sum::<f64>()));
    }
    Ok(out)
}

/// Level-`n` Wong–Zakai smoothing: piecewise-constant slopes on the dyadic
/// intervals `Δ_i = [i2⁻ⁿT, (i+1)2⁻ⁿT)`, delayed by one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedNoise {
    pub level: u32,
    pub horizon: f64,
    /// `n × 2ⁿ`, mode-major.
    pub slopes: Vec<f64>,
}

impl SmoothedNoise {
    pub fn intervals(&self) -> usize {
        1 << self.level
    }

    /// Index of the dyadic interval containing `t`; `t = T` belongs to the last.
    pub fn interval_of(&self, t: f64) -> usize {
        let parts = self.intervals();
        ((t / self.horizon * parts as f64).floor().max(0.0) as usize).min(parts - 1)
    }

    pub fn slope(&self, j: usize, i: usize) -> f64 {
        self.slopes[j * self.intervals() + i]
    }

    /// `ẇⁿ_j(t)` for every mode `j < n`.
    pub fn slopes_at(&self, t: f64) -> Vec<f64> {
        let i = self.interval_of(t);
        (0..self.level as usize).map(|j| self.slope(j, i)).collect()
    }

    /// `‖wⁿ(t, ·)‖_H`.
    pub fn h_norm_at(&self, t: f64) -> f64 {
        self.slopes_at(t).iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Lattice field `Σ_j √λ_j ẇⁿ_j(t) v_j`.
    pub fn lattice_field(&self, basis: &ModeBasis, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; basis.num_sites];
        basis.accumulate(&self.slopes_at(t), &mut out);
        out
    }
}

pub fn build_smoothed(path: &NoisePath, n: u32) -> Result<SmoothedNoise> {
    let w = dyadic_increments(path, n)?;
    let parts = 1usize << n;
    let t = path.grid.horizon;
    let scale = parts as f64 / t;
    let mut slopes = vec![0.0; w.len()];
    for j in 0..n as usize {
        for i in 0..parts - 1 {
            slopes[j * parts + i + 1] = scale * w[j * parts + i];
        }
    }
    Ok(SmoothedNoise {
        level: n,
        horizon: t,
        slopes,
    })
}

/// A Cameron–Martin control, piecewise constant on the time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlH {
    pub horizon: f64,
    pub num_steps: usize,
    /// `num_modes × num_steps`, mode-major.
    pub coefficients: Vec<f64>,
}

impl ControlH {
    pub fn zeros(horizon: f64, num_steps: usize, num_modes: usize) -> Self {
        ControlH {
            horizon,
            num_steps,
            coefficients: vec![0.0; num_modes * num_steps],
        }
    }

    /// `h_mode(t) = value` on all of `[0, T]`, other modes zero.
    pub fn constant(horizon: f64, num_steps: usize, num_modes: usize, mode: usize, value: f64) -> Self {
        let mut h = ControlH::zeros(horizon, num_steps, num_modes);
        h.coefficients[mode * num_steps..(mode + 1) * num_steps].fill(value);
        h
    }

    /// The realized slopes of `wⁿ`, resampled on the time steps.
    pub fn from_smoothed(w: &SmoothedNoise, num_steps: usize, num_modes: usize) -> Self {
        let mut h = ControlH::zeros(w.horizon, num_steps, num_modes);
        let dt = w.horizon / num_steps as f64;
        for m in 0..num_steps {
            let i = w.interval_of(m as f64 * dt);
            for j in 0..(w.level as usize).min(num_modes) {
                h.coefficients[j * num_steps + m] = w.slope(j, i);
            }
        }
        h
    }

    pub fn num_modes(&self) -> usize {
        self.coefficients.len() / self.num_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.num_steps as f64
    }

    pub fn value(&self, j: usize, m: usize) -> f64 {
        self.coefficients[j * self.num_steps + m]
    }

    pub fn at_step(&self, m: usize) -> Vec<f64> {
        (0..self.num_modes()).map(|j| self.value(j, m)).collect()
    }

    /// `‖h‖²_{H_T} = ∫_0^T Σ_j h_j(s)² ds`.
    pub fn squared_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>() * self.dt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ControlH {
            coefficients: self.coefficients.iter().map(|c| factor * c).collect(),
            ..self.clone()
        }
    }

    /// Pointwise sum; the result has as many modes as the larger operand.
    pub fn add(&self, other: &ControlH) -> Result<Self> {
        if self.num_steps != other.num_steps || self.horizon != other.horizon {
            return Err(Error::GridMismatch("controls live on different time grids".into()));
        }
        let modes = self.num_modes().max(other.num_modes());
        let mut out = ControlH::zeros(self.horizon, self.num_steps, modes);
        for src in [self, other] {
            for (o, c) in out.coefficients.iter_mut().zip(&src.coefficients) {
                *o += c;
            }
        }
        Ok(out)
    }

    /// Lattice field `Σ_j √λ_j h_j(t_m) v_j`.
    pub fn lattice_field(&self, basis: &ModeBasis, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; basis.num_sites];
        basis.accumulate(&self.at_step(m), &mut out);
        out
    }
}

/// Elements of `H_T` that are piecewise constant in time.
pub trait HtElement {
    fn horizon(&self) -> f64;
    /// `∫_a^b ‖φ(s)‖²_H ds`.
    fn squared_norm_on(&self, a: f64, b: f64) -> f64;
}

fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

impl HtElement for SmoothedNoise {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn squared_norm_on(&self, a: f64, b: f64) -> f64 {
        let parts = self.intervals();
        let width = self.horizon / parts as f64;
        (0..parts)
            .map(|i| {
                let len = overlap(a, b, i as f64 * width, (i + 1) as f64 * width);
                if len == 0.0 {
                    return 0.0;
                }
                len * (0..self.level as usize).map(|j| self.slope(j, i).powi(2)).sum::<f64>()
            })
            .sum()
    }
}

impl HtElement for ControlH {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn squared_norm_on(&self, a: f64, b: f64) -> f64 {
        let dt = self.dt();
        (0..self.num_steps)
            .map(|m| {
                let len = overlap(a, b, m as f64 * dt, (m + 1) as f64 * dt);
                if len == 0.0 {
                    return 0.0;
                }
                len * (0..self.num_modes()).map(|j| self.value(j, m).powi(2)).sum::<f64>()
            })
            .sum()
    }
}

fn check_interval(obj: &dyn HtElement, interval: (f64, f64)) -> Result<()> {
    let (a, b) = interval;
    let t = obj.horizon();
    if !(0.0 <= a && a <= b && b <= t * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!("interval [{a}, {b}] is not inside [0, {t}]")));
    }
    Ok(())
}

/// `‖φ 1_{[a, b]}‖_{H_T}`.
pub fn ht_norm(obj: &dyn HtElement, interval: (f64, f64)) -> Result<f64> {
    check_interval(obj, interval)?;
    Ok(obj.squared_norm_on(interval.0, interval.1).sqrt())
}

/// As [`ht_norm`], reported only on the event `L_n(b)`.
pub fn ht_norm_localized(
    obj: &dyn HtElement,
    interval: (f64, f64),
    path: &NoisePath,
    n: u32,
    alpha: f64,
) -> Result<Option<f64>> {
    check_interval(obj, interval)?;
    if localization_indicator(path, n, interval.1, alpha)? {
        Ok(Some(obj.squared_norm_on(interval.0, interval.1).sqrt()))
    } else {
        Ok(None)
    }
}

/// Largest dyadic index `[2ⁿ t/T − 1]⁺` entering `L_n(t)`.
pub fn localization_last_interval(n: u32, t: f64, horizon: f64) -> usize {
    let parts = 1usize << n;
    let x = (parts as f64 * t / horizon - 1.0).floor().max(0.0) as usize;
    x.min(parts - 1)
}

/// Bound `α n^{1/2} 2^{-n/2}` on the localized increments.
pub fn localization_level(n: u32, alpha: f64) -> f64 {
    alpha * (n as f64).sqrt() * 2f64.powf(-(n as f64) / 2.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > alpha_threshold()) {
        return Err(Error::Parameter(format!(
            "alpha must exceed √(2 ln 2) ≈ {:.4}, got {alpha}",
            alpha_threshold()
        )));
    }
    Ok(())
}

/// Indicator of `L_n(t)`: every `|W_j(Δ_i)|`, `j ≤ n`, `i ≤ [2ⁿt/T − 1]⁺`,
/// stays below `α n^{1/2} 2^{-n/2}`.
pub fn localization_indicator(path: &NoisePath, n: u32, t: f64, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let w = dyadic_increments(path, n)?;
    let parts = 1usize << n;
    let last = localization_last_interval(n, t, path.grid.horizon);
    let level = localization_level(n, alpha);
    Ok((0..n as usize).all(|j| w[j * parts..=j * parts + last].iter().all(|v| v.abs() <= level)))
}

/// Closed form `P(L_n(t))`: the `n(i_max + 1)` increments are independent
/// `N(0, 2⁻ⁿT)`, so the probability is a power of a Gaussian CDF.
pub fn localization_probability(n: u32, t: f64, horizon: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Parameter("level n must be at least 1".into()));
    }
    let sigma = (horizon / (1u64 << n) as f64).sqrt();
    let single = erf(localization_level(n, alpha) / (sigma * std::f64::consts::SQRT_2));
    let count = n as usize * (localization_last_interval(n, t, horizon) + 1);
    Ok(single.powi(count as i32))
}

/// Shifts the first modes of `path` by `∫_{step}(h_j − ẇⁿ_j) ds` and
/// re-synthesizes the lattice increments; the component of each increment
/// orthogonal to the retained eigenmodes is left untouched.
pub fn girsanov_shift(path: &NoisePath, h: &ControlH, n: u32) -> Result<NoisePath> {
    let w = build_smoothed(path, n)?;
    let grid = &path.grid;
    if h.num_steps != grid.num_steps || (h.horizon - grid.horizon).abs() > 1e-12 * grid.horizon {
        return Err(Error::GridMismatch(format!(
            "control has {} steps on [0, {}], noise has {} on [0, {}]",
            h.num_steps, h.horizon, grid.num_steps, grid.horizon
        )));
    }
    let basis = path.basis.as_ref().expect("checked by build_smoothed");
    let modes = basis.num_modes();
    if h.num_modes() > modes {
        return Err(Error::Parameter(format!(
            "control has {} modes, noise basis only {modes}",
            h.num_modes()
        )));
    }
    let dt = grid.dt();
    let sites = grid.num_sites();
    let steps = grid.num_steps;
    let mut shifted = path.clone();
    let mut delta = vec![0.0; modes];
    for m in 0..steps {
        let wdot = w.slopes_at(m as f64 * dt);
        for (j, d) in delta.iter_mut().enumerate() {
            let hj = if j < h.num_modes() { h.value(j, m) } else { 0.0 };
            let wj = wdot.get(j).copied().unwrap_or(0.0);
            *d = (hj - wj) * dt;
            shifted.mode_increments[j * steps + m] += *d;
        }
        basis.accumulate(&delta, &mut shifted.increments[m * sites..(m + 1) * sites]);
    }
    Ok(shifted)
}
