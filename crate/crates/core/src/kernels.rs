//! Spatial covariance kernels and the integral conditions they are checked
//! against.
//!
//! A kernel is radial, `f(x) = F(|x|)`. Two families are supported: the Riesz
//! kernel `|x|^{-β}` and a tabulated radial profile. Every evaluation used to
//! build covariance matrices goes through [`CovarianceSpec::radial`], which
//! clamps the radius from below at `reg_radius`; the regularity integrals use
//! the unregularized Riesz profile, since they are statements about `f`
//! itself rather than its lattice stand-in.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_from_origin, Tolerance};

/// Radial profile sampled at strictly increasing radii, interpolated
/// linearly in `log r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = RadialTable { radii, values };
        table.validate()?;
        Ok(table)
    }

    /// Parses two whitespace-separated columns `r f(r)`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::InvalidKernel(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::InvalidKernel(format!("line {}: {s:?}: {e}", lineno + 1))
                })
            };
            radii.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        RadialTable::new(radii, values)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RadialTable::parse(&text)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn validate(&self) -> Result<()> {
        if self.radii.len() != self.values.len() {
            return Err(Error::InvalidKernel("radius and value columns differ in length".into()));
        }
        if self.radii.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two samples".into()));
        }
        if self.radii[0] <= 0.0 || !self.radii.iter().all(|r| r.is_finite()) {
            return Err(Error::InvalidKernel("radii must be positive and finite".into()));
        }
        if self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel("radii must be strictly increasing".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidKernel(format!("negative or non-finite sample {v}")));
        }
        if self.values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidKernel("profile must be nonincreasing in r".into()));
        }
        Ok(())
    }

    fn min_radius(&self) -> f64 {
        self.radii[0]
    }

    fn max_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    fn outside(&self, r: f64) -> Error {
        Error::OutsideTable {
            radius: r,
            min: self.min_radius(),
            max: self.max_radius(),
        }
    }

    fn segment(&self, r: f64) -> Result<usize> {
        let tol = 1e-12 * self.max_radius();
        if r < self.min_radius() - tol || r > self.max_radius() + tol || r.is_nan() {
            return Err(self.outside(r));
        }
        let idx = self.radii.partition_point(|&x| x <= r);
        Ok(idx.clamp(1, self.radii.len() - 1) - 1)
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.radii[i + 1] / self.radii[i]).ln()
    }

    pub fn interpolate(&self, r: f64) -> Result<f64> {
        let i = self.segment(r)?;
        let v = self.values[i] + self.slope(i) * (r / self.radii[i]).ln();
        Ok(v.max(0.0))
    }

    /// `∫_a^b ρ F(ρ) dρ`, exact for the log-linear interpolant.
    fn moment(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let ia = self.segment(a)?;
        let ib = self.segment(b)?;
        let anti = |i: usize, rho: f64| {
            let c = self.slope(i);
            0.5 * rho * rho * (self.values[i] + c * (rho / self.radii[i]).ln()) - 0.25 * c * rho * rho
        };
        if ia == ib {
            return Ok(anti(ia, b) - anti(ia, a));
        }
        let mut total = anti(ia, self.radii[ia + 1]) - anti(ia, a);
        for i in ia + 1..ib {
            total += anti(i, self.radii[i + 1]) - anti(i, self.radii[i]);
        }
        total += anti(ib, b) - anti(ib, self.radii[ib]);
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Riesz { beta: f64 },
    Tabulated { table: RadialTable },
}

/// A radial covariance kernel with its regularization scale and the time
/// horizon `T` that fixes the `2T` integration ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kind: KernelKind,
    pub reg_radius: f64,
    pub horizon: f64,
}

impl CovarianceSpec {
    pub fn riesz(beta: f64, reg_radius: f64, horizon: f64) -> Result<Self> {
        let spec = CovarianceSpec {
            kind: KernelKind::Riesz { beta },
            reg_radius,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(table: RadialTable, reg_radius: f64, horizon: f64) -> Result<Self> {
        let spec = CovarianceSpec {
            kind: KernelKind::Tabulated { table },
            reg_radius,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reg_radius > 0.0 && self.reg_radius.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "reg_radius must be positive, got {}",
                self.reg_radius
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        match &self.kind {
            KernelKind::Riesz { beta } => {
                if !(*beta > 0.0 && *beta < 2.0) {
                    return Err(Error::InvalidKernel(format!(
                        "Riesz exponent must lie in (0, 2), got {beta}"
                    )));
                }
            }
            KernelKind::Tabulated { table } => {
                table.validate()?;
                if self.reg_radius < table.min_radius() || self.reg_radius > table.max_radius() {
                    return Err(Error::InvalidKernel(format!(
                        "reg_radius {} outside tabulated range [{}, {}]",
                        self.reg_radius,
                        table.min_radius(),
                        table.max_radius()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Riesz exponent, if this is a Riesz kernel.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Riesz { beta } => Some(beta),
            KernelKind::Tabulated { .. } => None,
        }
    }

    /// Regularized radial profile `F(max(r, reg_radius))`.
    pub fn radial(&self, r: f64) -> Result<f64> {
        let r = r.max(self.reg_radius);
        match &self.kind {
            KernelKind::Riesz { beta } => Ok(r.powf(-beta)),
            KernelKind::Tabulated { table } => table.interpolate(r),
        }
    }

    /// Kernel evaluated at a point, with the near-origin regularization.
    pub fn eval(&self, x: [f64; 3]) -> Result<f64> {
        self.radial(norm(x))
    }

    /// Profile used by the regularity integrals: the raw Riesz power, or the
    /// (necessarily clamped) tabulated profile.
    fn profile(&self, r: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Riesz { beta } => Ok(r.powf(-beta)),
            KernelKind::Tabulated { .. } => self.radial(r),
        }
    }

    /// `∫_a^b ρ F(ρ) dρ` with either the regularized or the raw profile.
    pub fn radial_moment(&self, a: f64, b: f64, regularized: bool) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match &self.kind {
            KernelKind::Riesz { beta } => {
                let e = 2.0 - beta;
                let raw = |lo: f64, hi: f64| (hi.powf(e) - lo.powf(e)) / e;
                if !regularized || a >= self.reg_radius {
                    return Ok(raw(a, b));
                }
                let r = self.reg_radius;
                let inner_hi = b.min(r);
                let mut total = r.powf(-beta) * 0.5 * (inner_hi * inner_hi - a * a);
                if b > r {
                    total += raw(r, b);
                }
                Ok(total)
            }
            KernelKind::Tabulated { table } => {
                let r = self.reg_radius;
                let mut total = 0.0;
                if a < r {
                    let hi = b.min(r);
                    total += table.interpolate(r)? * 0.5 * (hi * hi - a * a);
                }
                if b > r {
                    total += table.moment(a.max(r), b)?;
                }
                Ok(total)
            }
        }
    }

    /// Average of the regularized kernel over the sphere of radius `radius`
    /// centred at distance `distance` from the origin:
    /// `(1/(2 s d)) ∫_{|d-s|}^{d+s} ρ F(ρ) dρ`.
    pub fn shell_average(&self, radius: f64, distance: f64) -> Result<f64> {
        let (s, d) = (radius.abs(), distance.abs());
        let scale = s.max(d).max(f64::MIN_POSITIVE);
        if s <= 1e-13 * scale {
            return self.radial(d);
        }
        if d <= 1e-13 * scale {
            return self.radial(s);
        }
        Ok(self.radial_moment((d - s).abs(), d + s, true)? / (2.0 * s * d))
    }
}

pub(crate) fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// `f(x)` with the near-origin regularization.
pub fn eval_kernel(spec: &CovarianceSpec, x: [f64; 3]) -> Result<f64> {
    spec.radial(norm(x))
}

/// `∫_{|x|≤1} f(x)/|x| dx = 4π ∫_0^1 r F(r) dr` by radial quadrature.
pub fn basic_integrability(spec: &CovarianceSpec) -> Result<f64> {
    let est = integrate_from_origin(
        |r| 4.0 * PI * r * profile_or_nan(spec, r),
        1.0,
        &[],
        Tolerance::default(),
    )?;
    finite_or_table_error(spec, est.value, 1.0)
}

fn profile_or_nan(spec: &CovarianceSpec, r: f64) -> f64 {
    spec.profile(r).unwrap_or(f64::NAN)
}

fn finite_or_table_error(spec: &CovarianceSpec, value: f64, max_r: f64) -> Result<f64> {
    if value.is_finite() {
        return Ok(value);
    }
    // the only way to get a NaN from the integrands is a radius beyond a table
    spec.profile(max_r)?;
    Err(Error::Quadrature {
        value,
        error: f64::INFINITY,
    })
}

/// `∫_{|z|≤2T} |f(z+w) - f(z)| / |z| dz`.
///
/// For radial, nonincreasing `f` the angular integral collapses onto the
/// radial moment: with `r = |z|` and `s = |z + w|`,
/// `(2π/|w|) ∫_0^{2T} dr ∫_{|r-|w||}^{r+|w|} s |F(s) - F(r)| ds`.
pub fn h1_increment_integral(spec: &CovarianceSpec, w: [f64; 3]) -> Result<f64> {
    let wn = norm(w);
    if wn == 0.0 {
        return Ok(0.0);
    }
    let big_r = 2.0 * spec.horizon;
    let inner = |r: f64| -> f64 {
        let run = || -> Result<f64> {
            let fr = spec.profile(r)?;
            let a = (r - wn).abs();
            let b = r + wn;
            let mut total = 0.0;
            if a < r {
                total += spec.radial_moment(a, r, false)? - fr * 0.5 * (r * r - a * a);
            }
            let lo = a.max(r);
            total += fr * 0.5 * (b * b - lo * lo) - spec.radial_moment(lo, b, false)?;
            Ok(total)
        };
        run().unwrap_or(f64::NAN)
    };
    let tol = Tolerance::default();
    let near = wn.min(big_r);
    let mut value = integrate_from_origin(&inner, near, &[0.5 * wn], tol)?.value;
    if big_r > near {
        value += integrate(&inner, near, big_r, &[], tol)?.value;
    }
    finite_or_table_error(spec, 2.0 * PI / wn * value, big_r + wn)
}

/// `∫_{|z|≤2T} |f(z+w) - 2f(z) + f(z-w)| / |z| dz`, reduced by axial
/// symmetry to a double integral over `|z|` and the cosine of the angle
/// between `z` and `w`.
pub fn h1_second_difference_integral(spec: &CovarianceSpec, w: [f64; 3]) -> Result<f64> {
    let wn = norm(w);
    if wn == 0.0 {
        return Ok(0.0);
    }
    let big_r = 2.0 * spec.horizon;
    let inner_tol = Tolerance::new(1e-10, 1e-7);
    let inner = |r: f64| -> f64 {
        let fr = profile_or_nan(spec, r);
        // u = 1 - v^4 concentrates nodes where |z - w| can vanish
        let integrand = |v: f64| {
            if v == 0.0 {
                return 0.0;
            }
            let v3 = v * v * v;
            let u = 1.0 - v3 * v;
            let cross = 2.0 * r * wn * u;
            let sp = (r * r + wn * wn + cross).sqrt();
            let sm = (r * r + wn * wn - cross).max(0.0).sqrt();
            let d = profile_or_nan(spec, sp) - 2.0 * fr + profile_or_nan(spec, sm);
            4.0 * v3 * d.abs()
        };
        match integrate(integrand, 0.0, 1.0, &[], inner_tol) {
            Ok(e) => 4.0 * PI * r * e.value,
            Err(Error::Quadrature { value, .. }) => 4.0 * PI * r * value,
            Err(_) => f64::NAN,
        }
    };
    let tol = Tolerance::default();
    let near = wn.min(big_r);
    let mut value = integrate_from_origin(&inner, near, &[0.5 * wn], tol)?.value;
    if big_r > near {
        value += integrate(&inner, near, big_r, &[], tol)?.value;
    }
    finite_or_table_error(spec, value, big_r + wn)
}

/// `∫_{|z|≤h} f(z)/|z| dz = 4π ∫_0^h r F(r) dr`, for `0 < h ≤ 2T`.
pub fn h2_small_ball_integral(spec: &CovarianceSpec, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 2.0 * spec.horizon * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!(
            "small-ball radius must lie in (0, 2T] = (0, {}], got {h}",
            2.0 * spec.horizon
        )));
    }
    let est = integrate_from_origin(
        |r| 4.0 * PI * r * profile_or_nan(spec, r),
        h,
        &[],
        Tolerance::default(),
    )?;
    finite_or_table_error(spec, est.value, h)
}

/// The two double-sphere integrals of the time-regularity hypothesis, with
/// `σ` the surface measure on the unit sphere.
///
/// For radial `f` every argument depends on `ξ` and `η` only through
/// `c = ξ·η`, whose law under `σ⊗σ` is `8π² dc` on `[-1, 1]`, so each is an
/// integral over `(s, c) ∈ [0, T] × [-1, 1]`.
pub fn h2_sphere_pair_integrals(spec: &CovarianceSpec, h: f64) -> Result<(f64, f64)> {
    if h == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Parameter(format!("h must lie in (0, 1], got {h}")));
    }
    let t_max = spec.horizon;
    let inner_tol = Tolerance::new(1e-12, 1e-7);
    let mut failure: Option<Error> = None;
    let cell = std::cell::RefCell::new(&mut failure);

    // c = -1 + 2 v^4 removes the (1 + c)^{-β/2} endpoint singularity
    let pair = |s: f64, second: bool| -> f64 {
        let integrand = |v: f64| {
            if v == 0.0 {
                return 0.0;
            }
            let v3 = v * v * v;
            let v4 = v3 * v;
            // |ξ + η| = √(2 + 2c) = 2v² and |sξ + (s+h)η|² = h² + 4s(s+h)v⁴,
            // written without the cancellation of c + 1 near c = −1
            let q = 2.0 * v * v;
            let f = |r: f64| profile_or_nan(spec, r);
            let diag = f((s + h) * q);
            let mixed = f((h * h + 4.0 * s * (s + h) * v4).sqrt());
            let d = if second {
                diag - 2.0 * mixed + f(s * q)
            } else {
                diag - mixed
            };
            8.0 * v3 * d.abs()
        };
        match integrate(integrand, 0.0, 1.0, &[], inner_tol) {
            Ok(e) => e.value,
            Err(err) => {
                let value = match err {
                    Error::Quadrature { value, .. } => value,
                    _ => f64::NAN,
                };
                cell.borrow_mut().get_or_insert(err);
                value
            }
        }
    };
    let sphere = 8.0 * PI * PI;
    let tol = Tolerance::default();
    // both integrands vanish at s = 0, where the profile itself is singular
    let first = integrate(|s| if s == 0.0 { 0.0 } else { s * pair(s, false) }, 0.0, t_max, &[h], tol)?;
    let second = integrate(|s| if s == 0.0 { 0.0 } else { s * s * pair(s, true) }, 0.0, t_max, &[h], tol)?;
    drop(cell);
    let v1 = sphere * first.value;
    let v2 = sphere * second.value;
    if !(v1.is_finite() && v2.is_finite()) {
        if let Some(err) = failure {
            return Err(err);
        }
        return finite_or_table_error(spec, f64::NAN, 2.0 * (t_max + h)).map(|v| (v, v));
    }
    Ok((v1, v2))
}

/// Power-law fit of an integral against its scale parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Fitted slope, capped at the admissible upper bound.
    pub exponent: f64,
    /// Slope before capping.
    pub raw_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub sample_points: Vec<(f64, f64)>,
}

/// `count` geometrically spaced scales from `lo` to `hi` inclusive.
pub fn geometric_scales(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Ordinary least squares of `log value` on `log scale`.
pub fn fit_power_law(points: &[(f64, f64)], cap: f64) -> Result<ExponentEstimate> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two scales, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Parameter("scales must be strictly increasing".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Parameter(format!(
            "log-log fit needs positive scale and value, got {p:?}"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(ExponentEstimate {
        exponent: slope.min(cap),
        raw_slope: slope,
        intercept,
        r_squared,
        sample_points: points.to_vec(),
    })
}

fn sample<F: Fn(f64) -> Result<f64>>(scales: &[f64], f: F) -> Result<Vec<(f64, f64)>> {
    scales.iter().map(|&s| Ok((s, f(s)?))).collect()
}

/// Fitted γ from [`h1_increment_integral`] along the `e_3` direction.
pub fn fit_h1_gamma(spec: &CovarianceSpec, scales: &[f64]) -> Result<ExponentEstimate> {
    let pts = sample(scales, |s| h1_increment_integral(spec, [0.0, 0.0, s]))?;
    fit_power_law(&pts, 1.0)
}

/// Fitted γ′ from [`h1_second_difference_integral`].
pub fn fit_h1_gamma_prime(spec: &CovarianceSpec, scales: &[f64]) -> Result<ExponentEstimate> {
    let pts = sample(scales, |s| h1_second_difference_integral(spec, [0.0, 0.0, s]))?;
    fit_power_law(&pts, 2.0)
}

/// Fitted ν from [`h2_small_ball_integral`]; the capped slope is `min(slope, 1)`.
pub fn fit_h2_nu(spec: &CovarianceSpec, scales: &[f64]) -> Result<ExponentEstimate> {
    let pts = sample(scales, |s| h2_small_ball_integral(spec, s))?;
    fit_power_law(&pts, 1.0)
}

/// Fitted `(ρ₁, ρ₂)` from [`h2_sphere_pair_integrals`].
pub fn fit_h2_rho(
    spec: &CovarianceSpec,
    scales: &[f64],
) -> Result<(ExponentEstimate, ExponentEstimate)> {
    let values = scales
        .iter()
        .map(|&h| h2_sphere_pair_integrals(spec, h))
        .collect::<Result<Vec<_>>>()?;
    let first: Vec<_> = scales.iter().zip(&values).map(|(&h, v)| (h, v.0)).collect();
    let second: Vec<_> = scales.iter().zip(&values).map(|(&h, v)| (h, v.1)).collect();
    Ok((fit_power_law(&first, 1.0)?, fit_power_law(&second, 2.0)?))
}

/// Scale grids used when estimating every hypothesis exponent at once.
#[derive(Debug, Clone)]
pub struct ScaleGrids {
    pub increment: Vec<f64>,
    pub small_ball: Vec<f64>,
    pub sphere_pair: Vec<f64>,
}

impl Default for ScaleGrids {
    fn default() -> Self {
        ScaleGrids {
            increment: geometric_scales(0.01, 0.3, 8),
            small_ball: geometric_scales(0.01, 1.0, 8),
            sphere_pair: geometric_scales(0.01, 0.3, 6),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisExponents {
    pub gamma: ExponentEstimate,
    pub gamma_prime: ExponentEstimate,
    pub nu: ExponentEstimate,
    pub rho1: ExponentEstimate,
    pub rho2: ExponentEstimate,
}

pub fn estimate_hypothesis_exponents(
    spec: &CovarianceSpec,
    grids: &ScaleGrids,
) -> Result<HypothesisExponents> {
    let (rho1, rho2) = fit_h2_rho(spec, &grids.sphere_pair)?;
    Ok(HypothesisExponents {
        gamma: fit_h1_gamma(spec, &grids.increment)?,
        gamma_prime: fit_h1_gamma_prime(spec, &grids.increment)?,
        nu: fit_h2_nu(spec, &grids.small_ball)?,
        rho1,
        rho2,
    })
}

/// Regularity exponents entering the admissible Hölder window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub nu: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Upper ends `(κ_max, ρ_max)` of the exponent windows for which the
/// approximation and support results hold.
pub fn admissible_holder_window(e: &ExponentSet) -> Result<(f64, f64)> {
    let unit = [
        ("gamma1", e.gamma1),
        ("gamma2", e.gamma2),
        ("gamma", e.gamma),
        ("nu", e.nu),
        ("rho1", e.rho1),
    ];
    for (name, v) in unit {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Parameter(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    for (name, v) in [("gamma_prime", e.gamma_prime), ("rho2", e.rho2)] {
        if !(v > 0.0 && v <= 2.0) {
            return Err(Error::Parameter(format!("{name} must lie in (0, 2], got {v}")));
        }
    }
    let kappa = e.gamma1.min(e.gamma2).min(e.gamma).min(0.5 * e.gamma_prime);
    let rho = kappa
        .min(0.5 * (e.nu + 1.0))
        .min(0.5 * (e.rho1 + kappa))
        .min(0.5 * e.rho2);
    Ok((kappa, rho))
}
