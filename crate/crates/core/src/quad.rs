//! One-dimensional adaptive quadrature.
//!
//! Globally adaptive Gauss–Kronrod (7/15) with bisection of the interval
//! carrying the largest error estimate, plus a dyadic-shell integrator for
//! integrands with an integrable singularity at the left endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Absolute/relative tolerance pair plus a subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-6,
            rel: 1e-4,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }

    fn satisfied(&self, value: f64, error: f64) -> bool {
        error <= self.abs.max(self.rel * value.abs())
    }
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`, splitting first at the given interior
/// breakpoints (points outside the open interval are ignored).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut evaluations = 15 * heap.len();

    while !tol.satisfied(total, total_err) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                value: sign * total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in double precision
            heap.push(worst);
            return Err(Error::Quadrature {
                value: sign * total,
                error: total_err,
            });
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    Ok(Estimate {
        value: sign * total,
        error: total_err,
        evaluations,
    })
}

/// Magnitude above which an integral is declared divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

const MAX_SHELLS: usize = 400;

/// Integrates `f` over `(0, b]` when `f` may have an integrable singularity
/// at the origin. The range is cut into dyadic shells `[b 2^{-k-1}, b 2^{-k}]`;
/// once the shell contributions decay geometrically the remaining tail is
/// summed analytically. A non-decaying sequence is reported as
/// [`Error::NonIntegrableKernel`].
pub fn integrate_from_origin<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if b <= 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    // Breakpoints only matter on the outermost shell, where they are
    // typically located (kinks at scale |w|, etc.). Inner shells get them too
    // when they fall inside.
    let shell_tol = Tolerance {
        abs: tol.abs * 1e-3,
        ..tol
    };
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    let mut prev: Option<f64> = None;
    let mut hi = b;
    for k in 0..MAX_SHELLS {
        let lo = 0.5 * hi;
        let est = integrate(&f, lo, hi, breakpoints, shell_tol)?;
        total += est.value;
        total_err += est.error;
        evaluations += est.evaluations;
        if !total.is_finite() || total.abs() > OVERFLOW_GUARD {
            return Err(Error::NonIntegrableKernel { partial: total });
        }
        let c = est.value.abs();
        if let Some(p) = prev {
            if k >= 4 && p > 0.0 {
                let ratio = c / p;
                if ratio < 1.0 - 1e-9 {
                    let tail = c * ratio / (1.0 - ratio);
                    if tail <= tol.abs.max(tol.rel * total.abs()) * 1e-2 || k + 1 == MAX_SHELLS {
                        let value = total + tail.copysign(est.value);
                        if value.abs() > OVERFLOW_GUARD {
                            return Err(Error::NonIntegrableKernel { partial: value });
                        }
                        return Ok(Estimate {
                            value,
                            error: total_err + 1e-2 * tail,
                            evaluations,
                        });
                    }
                } else if k + 1 == MAX_SHELLS {
                    return Err(Error::NonIntegrableKernel { partial: total });
                }
            }
            if c == 0.0 && p == 0.0 {
                return Ok(Estimate {
                    value: total,
                    error: total_err,
                    evaluations,
                });
            }
        }
        prev = Some(c);
        hi = lo;
    }
    Err(Error::NonIntegrableKernel { partial: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let est = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &[], Tolerance::default()).unwrap();
        assert!((est.value - 0.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(f64::exp, 0.0, 1.0, &[], Tolerance::default()).unwrap();
        let b = integrate(f64::exp, 1.0, 0.0, &[], Tolerance::default()).unwrap();
        assert!((a.value + b.value).abs() < 1e-14);
        assert!((a.value - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kink_with_breakpoint() {
        let est = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], Tolerance::new(1e-12, 1e-12))
            .unwrap();
        assert!((est.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn origin_singularity() {
        // integral of x^{-1/2} over (0, 1] is 2
        let est = integrate_from_origin(|x: f64| x.powf(-0.5), 1.0, &[], Tolerance::new(1e-10, 1e-8))
            .unwrap();
        assert!((est.value - 2.0).abs() < 1e-6, "{}", est.value);
        // integral of x^{-0.99} over (0, 1] is 100
        let est = integrate_from_origin(|x: f64| x.powf(-0.99), 1.0, &[], Tolerance::default())
            .unwrap();
        assert!((est.value - 100.0).abs() < 1e-2, "{}", est.value);
    }

    #[test]
    fn origin_divergence_detected() {
        let err = integrate_from_origin(|x: f64| 1.0 / x, 1.0, &[], Tolerance::default());
        assert!(matches!(err, Err(Error::NonIntegrableKernel { .. })));
    }
}
