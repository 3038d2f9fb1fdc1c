//! Actions of the 3D wave fundamental solution.
//!
//! `G(t)` is the uniform surface measure on the sphere of radius `t` with
//! density `1/(4πt)`, so its total mass is `t`. It is never stored as a
//! density: integrals against it are sums over nodes `x + tξ_q` with weights
//! `t·w_q/(4π)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::CovarianceSpec;

/// Node families on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SphereRule {
    /// Antipodally symmetric Fibonacci spiral with `N` equal weights.
    /// `N` must be even.
    Fibonacci(usize),
    /// Gauss–Legendre in `cos θ` times a uniform azimuthal grid.
    Product { polar: usize, azimuth: usize },
}

impl Default for SphereRule {
    fn default() -> Self {
        SphereRule::Fibonacci(256)
    }
}

impl fmt::Display for SphereRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SphereRule::Fibonacci(n) => write!(f, "fib:{n}"),
            SphereRule::Product { polar, azimuth } => write!(f, "product:{polar}x{azimuth}"),
        }
    }
}

impl FromStr for SphereRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnsupportedSphereRule(s.to_string());
        let (family, arg) = s.split_once(':').ok_or_else(bad)?;
        match family {
            "fib" | "fibonacci" => Ok(SphereRule::Fibonacci(arg.parse().map_err(|_| bad())?)),
            "product" => {
                let (p, a) = arg.split_once('x').ok_or_else(bad)?;
                Ok(SphereRule::Product {
                    polar: p.parse().map_err(|_| bad())?,
                    azimuth: a.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for SphereRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SphereRule> for String {
    fn from(r: SphereRule) -> String {
        r.to_string()
    }
}

const MAX_NODES: usize = 1 << 16;

/// Nodes on the unit sphere with weights summing to `4π`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub rule: SphereRule,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Largest polynomial degree integrated exactly.
    pub degree: usize,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_{S²} g dσ`.
    pub fn integrate<F: Fn([f64; 3]) -> f64>(&self, g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&n, &w)| w * g(n)).sum()
    }

    /// Average of `g` over the unit sphere.
    pub fn average<F: Fn([f64; 3]) -> f64>(&self, g: F) -> f64 {
        self.integrate(g) / (4.0 * PI)
    }
}

pub fn sphere_nodes(rule: SphereRule) -> Result<SphereQuadrature> {
    match rule {
        SphereRule::Fibonacci(n) => {
            if n < 2 || n % 2 != 0 || n > MAX_NODES {
                return Err(Error::UnsupportedSphereRule(format!(
                    "{rule}: Fibonacci rules need an even node count in [2, {MAX_NODES}]"
                )));
            }
            Ok(fibonacci(n, rule))
        }
        SphereRule::Product { polar, azimuth } => {
            if polar == 0 || azimuth == 0 || polar * azimuth > MAX_NODES || polar > 512 {
                return Err(Error::UnsupportedSphereRule(format!(
                    "{rule}: product rules need 1 ≤ polar ≤ 512 and at most {MAX_NODES} nodes"
                )));
            }
            Ok(product(polar, azimuth, rule))
        }
    }
}

fn fibonacci(n: usize, rule: SphereRule) -> SphereQuadrature {
    let golden = PI * (3.0 - 5f64.sqrt());
    let half = n / 2;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..half {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let r = (1.0 - z * z).sqrt();
        let (s, c) = (golden * i as f64).sin_cos();
        nodes.push([r * c, r * s, z]);
    }
    // mirror through the origin so that every odd moment cancels exactly
    for i in 0..half {
        let p = nodes[i];
        nodes.push([-p[0], -p[1], -p[2]]);
    }
    SphereQuadrature {
        rule,
        nodes,
        weights: vec![4.0 * PI / n as f64; n],
        degree: 1,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        let k = i.max(j) as f64;
        if i.abs_diff(j) == 1 {
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize to kill round-off in the odd moments
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, 2.0 * w / total)).unzip()
}

fn product(polar: usize, azimuth: usize, rule: SphereRule) -> SphereQuadrature {
    let (zs, ws) = gauss_legendre(polar);
    let mut nodes = Vec::with_capacity(polar * azimuth);
    let mut weights = Vec::with_capacity(polar * azimuth);
    let dphi = 2.0 * PI / azimuth as f64;
    for (&z, &w) in zs.iter().zip(&ws) {
        let r = (1.0 - z * z).max(0.0).sqrt();
        for k in 0..azimuth {
            let (s, c) = ((k as f64 + 0.5) * dphi).sin_cos();
            nodes.push([r * c, r * s, z]);
            weights.push(w * dphi);
        }
    }
    SphereQuadrature {
        rule,
        nodes,
        weights,
        degree: (2 * polar - 1).min(azimuth.saturating_sub(1)),
    }
}

/// Total mass of `G(t)`.
pub fn green_mass(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    t
}

/// Scalar fields that can be named in a configuration file, with their
/// analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarProfile {
    Zero,
    Constant { value: f64 },
    /// `scale·|x|²`.
    Quadratic { scale: f64 },
    /// `amplitude·exp(-|x|²/(2 width²))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `amplitude·(1 - |x|²/radius²)²` inside the ball, zero outside.
    CompactBump { amplitude: f64, radius: f64 },
}

impl ScalarProfile {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r2 = dot(x, x);
        match *self {
            ScalarProfile::Zero => 0.0,
            ScalarProfile::Constant { value } => value,
            ScalarProfile::Quadratic { scale } => scale * r2,
            ScalarProfile::Gaussian { amplitude, width } => {
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            ScalarProfile::CompactBump { amplitude, radius } => {
                let u = 1.0 - r2 / (radius * radius);
                if u > 0.0 {
                    amplitude * u * u
                } else {
                    0.0
                }
            }
        }
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = dot(x, x);
        let factor = match *self {
            ScalarProfile::Zero | ScalarProfile::Constant { .. } => 0.0,
            ScalarProfile::Quadratic { scale } => 2.0 * scale,
            ScalarProfile::Gaussian { width, .. } => -self.value(x) / (width * width),
            ScalarProfile::CompactBump { amplitude, radius } => {
                let u = 1.0 - r2 / (radius * radius);
                if u > 0.0 {
                    -4.0 * amplitude * u / (radius * radius)
                } else {
                    0.0
                }
            }
        };
        [factor * x[0], factor * x[1], factor * x[2]]
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            ScalarProfile::Zero => true,
            ScalarProfile::Constant { value } => value == 0.0,
            ScalarProfile::Quadratic { scale } => scale == 0.0,
            ScalarProfile::Gaussian { amplitude, .. } | ScalarProfile::CompactBump { amplitude, .. } => {
                amplitude == 0.0
            }
        }
    }
}

pub type ScalarField = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;

/// Initial position `v₀`, its gradient, and initial velocity `ṽ₀`.
#[derive(Clone)]
pub struct InitialData {
    pub v0: ScalarField,
    pub grad_v0: VectorField,
    pub v1: ScalarField,
    /// Hölder exponents `(γ₁, γ₂)` of the data, carried as metadata.
    pub holder: (f64, f64),
    zero: bool,
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("holder", &self.holder)
            .field("zero", &self.zero)
            .finish_non_exhaustive()
    }
}

impl InitialData {
    pub fn zero() -> Self {
        InitialData::from_profiles(ScalarProfile::Zero, ScalarProfile::Zero)
    }

    pub fn from_profiles(position: ScalarProfile, velocity: ScalarProfile) -> Self {
        InitialData {
            v0: Arc::new(move |x| position.value(x)),
            grad_v0: Arc::new(move |x| position.gradient(x)),
            v1: Arc::new(move |x| velocity.value(x)),
            holder: (1.0, 1.0),
            zero: position.is_zero() && velocity.is_zero(),
        }
    }

    pub fn custom(v0: ScalarField, grad_v0: VectorField, v1: ScalarField, holder: (f64, f64)) -> Self {
        InitialData {
            v0,
            grad_v0,
            v1,
            holder,
            zero: false,
        }
    }

    /// True when all data are known to vanish identically.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Largest discrepancy between `grad_v0` and central differences of
    /// `v0` with step `step`, over the given probe points.
    pub fn gradient_mismatch(&self, probes: &[[f64; 3]], step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for &p in probes {
            let g = (self.grad_v0)(p);
            for (axis, &ga) in g.iter().enumerate() {
                let mut hi = p;
                let mut lo = p;
                hi[axis] += step;
                lo[axis] -= step;
                let fd = ((self.v0)(hi) - (self.v0)(lo)) / (2.0 * step);
                worst = worst.max((fd - ga).abs());
            }
        }
        worst
    }
}

/// `X⁰(t, x) = t·avg ṽ₀(x + tξ) + avg v₀(x + tξ) + t·avg ⟨∇v₀(x + tξ), ξ⟩`.
pub fn kirchhoff_ic(data: &InitialData, t: f64, x: [f64; 3], quad: &SphereQuadrature) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("Kirchhoff term needs t > 0, got {t}")));
    }
    Ok(kirchhoff_unchecked(data, t, x, quad))
}

/// As [`kirchhoff_ic`] but also accepting `t = 0`, where it returns `v₀(x)`.
pub(crate) fn kirchhoff_unchecked(data: &InitialData, t: f64, x: [f64; 3], quad: &SphereQuadrature) -> f64 {
    if data.zero {
        return 0.0;
    }
    if t == 0.0 {
        return (data.v0)(x);
    }
    let total = quad.integrate(|xi| {
        let p = [x[0] + t * xi[0], x[1] + t * xi[1], x[2] + t * xi[2]];
        t * (data.v1)(p) + (data.v0)(p) + t * dot((data.grad_v0)(p), xi)
    });
    total / (4.0 * PI)
}

/// `∬ G(s, du) G(s′, dv) f(offset + u − v)`.
///
/// The inner sphere average is taken in closed form through the shell
/// average of the radial kernel, so only the outer sphere is discretized
/// by `quad`. At zero offset the result is exact for every rule.
pub fn sphere_pair_pairing(
    spec: &CovarianceSpec,
    s: f64,
    s_prime: f64,
    offset: [f64; 3],
    quad: &SphereQuadrature,
) -> Result<f64> {
    if !(s > 0.0 && s_prime > 0.0) {
        return Err(Error::Parameter(format!(
            "sphere radii must be positive, got {s} and {s_prime}"
        )));
    }
    let mut total = 0.0;
    for (eta, w) in quad.nodes.iter().zip(&quad.weights) {
        let y = [
            offset[0] - s_prime * eta[0],
            offset[1] - s_prime * eta[1],
            offset[2] - s_prime * eta[2],
        ];
        total += w * spec.shell_average(s, dot(y, y).sqrt())?;
    }
    Ok(s * s_prime * total / (4.0 * PI))
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rules() -> Vec<SphereRule> {
        vec![
            SphereRule::Fibonacci(2),
            SphereRule::Fibonacci(64),
            SphereRule::Fibonacci(256),
            SphereRule::Fibonacci(1000),
            SphereRule::Product { polar: 2, azimuth: 4 },
            SphereRule::Product { polar: 8, azimuth: 16 },
        ]
    }

    #[test]
    fn normalization_and_unit_nodes() {
        for rule in rules() {
            let q = sphere_nodes(rule).unwrap();
            assert_relative_eq!(q.weights.iter().sum::<f64>(), 4.0 * PI, epsilon = 1e-10);
            for n in &q.nodes {
                assert!((dot(*n, *n).sqrt() - 1.0).abs() < 1e-12);
            }
            assert!(q.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn odd_moments_vanish() {
        for rule in rules() {
            let q = sphere_nodes(rule).unwrap();
            for axis in 0..3 {
                assert!(q.integrate(|x| x[axis]).abs() < 1e-10, "{rule} axis {axis}");
                assert!(q.integrate(|x| x[axis].powi(3)).abs() < 1e-10);
            }
            assert!(q.integrate(|x| x[0] * x[1] * x[2]).abs() < 1e-10);
        }
    }

    #[test]
    fn second_moments() {
        for rule in [SphereRule::Fibonacci(64), SphereRule::Fibonacci(256)] {
            let q = sphere_nodes(rule).unwrap();
            assert_relative_eq!(q.integrate(|x| x[2] * x[2]), 4.0 * PI / 3.0, max_relative = 1e-3);
        }
        let q = sphere_nodes(SphereRule::Product { polar: 8, azimuth: 16 }).unwrap();
        assert!(q.degree >= 2);
        for axis in 0..3 {
            assert_relative_eq!(q.integrate(|x| x[axis] * x[axis]), 4.0 * PI / 3.0, epsilon = 1e-12);
        }
        assert!(q.integrate(|x| x[0] * x[1]).abs() < 1e-12);
        // degree 4: ∫ z⁴ = 4π/5
        assert_relative_eq!(q.integrate(|x| x[2].powi(4)), 4.0 * PI / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn unsupported_rules() {
        assert!(sphere_nodes(SphereRule::Fibonacci(3)).is_err());
        assert!(sphere_nodes(SphereRule::Fibonacci(0)).is_err());
        assert!(sphere_nodes(SphereRule::Product { polar: 0, azimuth: 4 }).is_err());
        assert!("lebedev:14".parse::<SphereRule>().is_err());
        assert_eq!("fib:256".parse::<SphereRule>().unwrap(), SphereRule::Fibonacci(256));
        assert_eq!(
            "product:6x12".parse::<SphereRule>().unwrap(),
            SphereRule::Product { polar: 6, azimuth: 12 }
        );
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(5);
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(m8, 2.0 / 9.0, epsilon = 1e-13);
    }

    #[test]
    fn green_mass_values() {
        assert_eq!(green_mass(0.0), 0.0);
        assert_eq!(green_mass(1.0), 1.0);
        assert_eq!(green_mass(2.5), 2.5);
    }

    #[test]
    fn kirchhoff_simple_data() {
        let q = sphere_nodes(SphereRule::Fibonacci(256)).unwrap();
        let x = [0.3, -0.2, 0.1];
        assert_eq!(kirchhoff_ic(&InitialData::zero(), 0.7, x, &q).unwrap(), 0.0);
        let c = InitialData::from_profiles(ScalarProfile::Constant { value: 2.5 }, ScalarProfile::Zero);
        assert_relative_eq!(kirchhoff_ic(&c, 0.7, x, &q).unwrap(), 2.5, epsilon = 1e-12);
        let v = InitialData::from_profiles(ScalarProfile::Zero, ScalarProfile::Constant { value: 1.0 });
        assert_relative_eq!(kirchhoff_ic(&v, 0.7, x, &q).unwrap(), 0.7, epsilon = 1e-12);
        assert!(kirchhoff_ic(&v, 0.0, x, &q).is_err());
    }

    #[test]
    fn kirchhoff_quadratic_mean_value() {
        let q = sphere_nodes(SphereRule::Product { polar: 4, azimuth: 8 }).unwrap();
        let data = InitialData::from_profiles(ScalarProfile::Quadratic { scale: 1.0 }, ScalarProfile::Zero);
        for (t, x) in [(0.5, [0.1, 0.2, 0.3]), (1.0, [0.0; 3]), (2.0, [-1.0, 0.5, 2.0])] {
            let exact = dot(x, x) + 3.0 * t * t;
            assert_relative_eq!(kirchhoff_ic(&data, t, x, &q).unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let probes: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let a = i as f64 * 0.37;
                [a.sin() * 0.8, a.cos() * 0.5, (2.0 * a).sin() * 0.3]
            })
            .collect();
        for profile in [
            ScalarProfile::Quadratic { scale: 1.5 },
            ScalarProfile::Gaussian { amplitude: 2.0, width: 0.4 },
            ScalarProfile::CompactBump { amplitude: 1.0, radius: 0.9 },
        ] {
            let data = InitialData::from_profiles(profile, ScalarProfile::Zero);
            assert!(data.gradient_mismatch(&probes, 1e-4) < 1e-6, "{profile:?}");
        }
    }

    #[test]
    fn pairing_closed_form_at_zero_offset() {
        let q = sphere_nodes(SphereRule::Fibonacci(256)).unwrap();
        for beta in [0.5, 1.0, 1.5] {
            let spec = CovarianceSpec::riesz(beta, 1e-6, 1.0).unwrap();
            for s in [1.0f64, 2.0] {
                let exact = s.powf(2.0 - beta) * 2f64.powf(1.0 - beta) / (2.0 - beta);
                let v = sphere_pair_pairing(&spec, s, s, [0.0; 3], &q).unwrap();
                assert_relative_eq!(v, exact, max_relative = 1e-2);
            }
        }
        let spec = CovarianceSpec::riesz(1.0, 1e-6, 1.0).unwrap();
        assert_relative_eq!(sphere_pair_pairing(&spec, 1.0, 1.0, [0.0; 3], &q).unwrap(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(sphere_pair_pairing(&spec, 2.0, 2.0, [0.0; 3], &q).unwrap(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn pairing_constant_kernel_is_mass_product() {
        let table = RadialTable::new(vec![1e-3, 100.0], vec![1.0, 1.0]).unwrap();
        let spec = CovarianceSpec::tabulated(table, 1e-3, 1.0).unwrap();
        let q = sphere_nodes(SphereRule::Fibonacci(64)).unwrap();
        let v = sphere_pair_pairing(&spec, 0.7, 1.3, [0.2, 0.1, -0.4], &q).unwrap();
        assert_relative_eq!(v, 0.7 * 1.3, epsilon = 1e-12);
    }

    #[test]
    fn pairing_against_product_rule_oracle() {
        // Oracle: plain double sum over two product rules at a nonzero
        // offset, where the kernel stays far from its singularity.
        let spec = CovarianceSpec::riesz(1.0, 1e-6, 1.0).unwrap();
        let q = sphere_nodes(SphereRule::Product { polar: 16, azimuth: 32 }).unwrap();
        let (s, sp, off) = (0.3, 0.5, [1.5, 0.4, -0.2]);
        let mut brute = 0.0;
        for (xi, wx) in q.nodes.iter().zip(&q.weights) {
            for (eta, we) in q.nodes.iter().zip(&q.weights) {
                let z = [
                    off[0] + s * xi[0] - sp * eta[0],
                    off[1] + s * xi[1] - sp * eta[1],
                    off[2] + s * xi[2] - sp * eta[2],
                ];
                brute += wx * we / dot(z, z).sqrt();
            }
        }
        brute *= s * sp / (16.0 * PI * PI);
        let v = sphere_pair_pairing(&spec, s, sp, off, &q).unwrap();
        assert_relative_eq!(v, brute, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn pairing_symmetric_in_radii(s in 0.05f64..2.0, sp in 0.05f64..2.0, beta in 0.2f64..1.8) {
            let spec = CovarianceSpec::riesz(beta, 1e-4, 1.0).unwrap();
            let q = sphere_nodes(SphereRule::Fibonacci(64)).unwrap();
            let a = sphere_pair_pairing(&spec, s, sp, [0.0; 3], &q).unwrap();
            let b = sphere_pair_pairing(&spec, sp, s, [0.0; 3], &q).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        }

        #[test]
        fn finite_speed_for_compact_data(r in 0.1f64..0.5, t in 0.05f64..0.8, dir in prop::array::uniform3(-1.0f64..1.0)) {
            let norm = dot(dir, dir).sqrt();
            prop_assume!(norm > 1e-3);
            let q = sphere_nodes(SphereRule::Fibonacci(256)).unwrap();
            let data = InitialData::from_profiles(
                ScalarProfile::CompactBump { amplitude: 1.0, radius: r },
                ScalarProfile::CompactBump { amplitude: 0.5, radius: r },
            );
            let d = r + t + 1e-6;
            let x = [dir[0] / norm * d, dir[1] / norm * d, dir[2] / norm * d];
            prop_assert_eq!(kirchhoff_ic(&data, t, x, &q).unwrap(), 0.0);
        }
    }
}
