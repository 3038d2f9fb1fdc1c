//! Hölder norms, moduli of continuity and increment exponents of sampled
//! fields, all with respect to the additive metric `|t − t̄| + |x − x̄|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{fit_power_law, norm, ExponentEstimate};
use crate::solver::FieldSample;

/// Grids with more points than this use binned pair subsampling.
pub const EXHAUSTIVE_LIMIT: usize = 10_000;
const BINS: usize = 32;
const PAIRS_PER_BIN: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTime {
    pub t: f64,
    pub x: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub rho: f64,
    pub t0: f64,
    pub sup_term: f64,
    pub seminorm_term: f64,
    /// `sup_term + seminorm_term`.
    pub norm: f64,
    /// Pair attaining the seminorm, if any pair has a nonzero increment.
    pub argmax_pair: Option<(SpaceTime, SpaceTime)>,
    /// `(δ, O_g(δ))` for `ρ′ = rho` on geometric `δ` between the smallest
    /// and largest pair distance.
    pub modulus_curve: Vec<(f64, f64)>,
    pub subsampled: bool,
    pub num_points: usize,
}

/// Grid points with `t ≥ t0`, flattened.
struct Points {
    coords: Vec<SpaceTime>,
    values: Vec<f64>,
}

impl Points {
    fn new(field: &FieldSample, t0: f64) -> Result<Self> {
        let tol = 1e-12 * field.grid.horizon.max(1.0);
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (i, &t) in field.times.iter().enumerate() {
            if t < t0 - tol {
                continue;
            }
            for (j, &x) in field.eval_points.iter().enumerate() {
                coords.push(SpaceTime { t, x });
                values.push(field.value(i, j));
            }
        }
        if coords.len() < 2 {
            return Err(Error::DegenerateGrid(format!(
                "{} grid point(s) with t ≥ {t0}; need at least two",
                coords.len()
            )));
        }
        Ok(Points { coords, values })
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.coords[i], &self.coords[j]);
        (a.t - b.t).abs() + norm([a.x[0] - b.x[0], a.x[1] - b.x[1], a.x[2] - b.x[2]])
    }

    fn subsampled(&self) -> bool {
        self.len() > EXHAUSTIVE_LIMIT
    }

    /// Pairs `(i, j, distance)` with positive distance: all of them for
    /// small grids, otherwise up to `PAIRS_PER_BIN` per log-distance bin.
    fn pairs(&self) -> Vec<(u32, u32, f64)> {
        let n = self.len();
        if !self.subsampled() {
            return (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    (i + 1..n).filter_map(move |j| {
                        let d = self.distance(i, j);
                        (d > 0.0).then_some((i as u32, j as u32, d))
                    })
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_6a1f);
        let mut probe = Vec::with_capacity(4096);
        for _ in 0..4096 {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            probe.push(self.distance(i, j));
        }
        let max = probe.iter().cloned().fold(0.0, f64::max) * 1.5;
        let min = self.nearest_distance().max(max * 1e-9);
        let span = (max / min).ln().max(f64::MIN_POSITIVE);
        let mut counts = [0usize; BINS];
        let mut out = Vec::new();
        // every point with its lattice neighbours fills the finest bins
        for i in 0..n {
            for j in i + 1..(i + 8).min(n) {
                let d = self.distance(i, j);
                if d > 0.0 {
                    let b = (((d / min).ln() / span * BINS as f64) as usize).min(BINS - 1);
                    if counts[b] < PAIRS_PER_BIN {
                        counts[b] += 1;
                        out.push((i as u32, j as u32, d));
                    }
                }
            }
        }
        let budget = 8 * BINS * PAIRS_PER_BIN;
        for _ in 0..budget {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let d = self.distance(i, j);
            if d <= 0.0 {
                continue;
            }
            let b = (((d / min).ln() / span * BINS as f64).max(0.0) as usize).min(BINS - 1);
            if counts[b] < PAIRS_PER_BIN {
                counts[b] += 1;
                out.push((i.min(j) as u32, i.max(j) as u32, d));
            }
        }
        out
    }

    fn nearest_distance(&self) -> f64 {
        (0..self.len().min(2000))
            .flat_map(|i| (i + 1..(i + 64).min(self.len())).map(move |j| (i, j)))
            .map(|(i, j)| self.distance(i, j))
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("Hölder exponent {rho} must lie in (0, 1)")))
    }
}

/// `‖g‖_{ρ,t₀} = sup |g| + sup |g(t,x) − g(t̄,x̄)| / (|t − t̄| + |x − x̄|)^ρ`
/// over the grid points with `t, t̄ ≥ t₀`.
pub fn holder_norm(field: &FieldSample, rho: f64, t0: f64) -> Result<HolderReport> {
    check_rho(rho)?;
    let pts = Points::new(field, t0)?;
    let sup_term = pts.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let pairs = pts.pairs();
    let ratio = |&(i, j, d): &(u32, u32, f64)| (pts.values[i as usize] - pts.values[j as usize]).abs() / d.powf(rho);
    // ties resolve to the first pair in enumeration order
    let best = pairs
        .par_iter()
        .enumerate()
        .map(|(k, p)| (ratio(p), k))
        .reduce(
            || (0.0, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let seminorm_term = best.0;
    let argmax_pair = (best.1 != usize::MAX && seminorm_term > 0.0).then(|| {
        let (i, j, _) = pairs[best.1];
        (pts.coords[i as usize], pts.coords[j as usize])
    });
    let deltas = default_deltas(&pairs);
    let modulus_curve = modulus_from_pairs(&pts, &pairs, rho, &deltas);
    Ok(HolderReport {
        rho,
        t0,
        sup_term,
        seminorm_term,
        norm: sup_term + seminorm_term,
        argmax_pair,
        modulus_curve,
        subsampled: pts.subsampled(),
        num_points: pts.len(),
    })
}

/// Hölder norm of `f1 − f2`.
pub fn holder_distance(f1: &FieldSample, f2: &FieldSample, rho: f64, t0: f64) -> Result<f64> {
    check_rho(rho)?;
    let d = f1.difference(f2)?;
    let pts = Points::new(&d, t0)?;
    if pts.subsampled() || d.num_points() > GAP_TABLE_POINTS {
        return Ok(holder_norm(&d, rho, t0)?.norm);
    }
    let sup_term = pts.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(sup_term + gap_grouped_seminorm(&d, t0, rho))
}

/// Largest per-row point count for which [`gap_grouped_seminorm`] keeps a
/// `points × points` weight table.
const GAP_TABLE_POINTS: usize = 1024;

/// Exhaustive seminorm of a time × space product grid. Row pairs with the
/// same time gap share the weights `d^{-ρ}` of all point pairs, so each
/// weight is computed once per distinct gap instead of once per pair.
fn gap_grouped_seminorm(field: &FieldSample, t0: f64, rho: f64) -> f64 {
    let tol = 1e-12 * field.grid.horizon.max(1.0);
    let rows: Vec<usize> = (0..field.num_times()).filter(|&r| field.times[r] >= t0 - tol).collect();
    let np = field.num_points();
    let mut spatial = vec![0.0; np * np];
    for (a, x) in field.eval_points.iter().enumerate() {
        for (b, y) in field.eval_points.iter().enumerate() {
            spatial[a * np + b] = norm([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
        }
    }
    // gaps equal up to rounding share a group, keyed on a 2^-40 grid
    let scale = (1u64 << 40) as f64 / field.grid.horizon.max(f64::MIN_POSITIVE);
    let mut groups: Vec<(i64, f64, Vec<(usize, usize)>)> = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        for &s in &rows[i..] {
            let gap = (field.times[s] - field.times[r]).abs();
            let key = (gap * scale).round() as i64;
            match groups.iter_mut().find(|g| g.0 == key) {
                Some(g) => g.2.push((r, s)),
                None => groups.push((key, gap, vec![(r, s)])),
            }
        }
    }
    groups
        .par_iter()
        .map(|(_, gap, pairs)| {
            let w: Vec<f64> = spatial
                .iter()
                .map(|&dx| {
                    let d = gap + dx;
                    if d > 0.0 {
                        d.powf(-rho)
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut best = 0.0f64;
            for &(r, s) in pairs {
                let (vr, vs) = (field.row(r), field.row(s));
                for a in 0..np {
                    let x = vr[a];
                    let wa = &w[a * np..(a + 1) * np];
                    // within one row each unordered pair once
                    let from = if r == s { a + 1 } else { 0 };
                    for b in from..np {
                        best = best.max((x - vs[b]).abs() * wa[b]);
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// `O_g(δ) = sup_{0 < d(p, q) < δ} |g(p) − g(q)| / d(p, q)^{ρ′}` for each `δ`.
pub fn modulus_of_continuity(field: &FieldSample, rho_prime: f64, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_rho(rho_prime)?;
    let pts = Points::new(field, f64::NEG_INFINITY)?;
    let pairs = pts.pairs();
    Ok(modulus_from_pairs(&pts, &pairs, rho_prime, deltas))
}

fn default_deltas(pairs: &[(u32, u32, f64)]) -> Vec<f64> {
    let (lo, hi) = pairs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.2), hi.max(p.2)));
    if !(lo.is_finite() && hi > lo) {
        return if lo.is_finite() { vec![lo * (1.0 + 1e-9)] } else { Vec::new() };
    }
    let count = 16;
    let (a, b) = (lo * (1.0 + 1e-9), hi * (1.0 + 1e-9));
    (0..count)
        .map(|i| a * (b / a).powf(i as f64 / (count - 1) as f64))
        .collect()
}

fn modulus_from_pairs(pts: &Points, pairs: &[(u32, u32, f64)], rho: f64, deltas: &[f64]) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| deltas[i]).collect();
    // best[k]: largest ratio among pairs whose smallest admissible δ is sorted[k]
    let best = pairs
        .par_iter()
        .fold(
            || vec![0.0f64; sorted.len()],
            |mut acc, &(i, j, d)| {
                let k = sorted.partition_point(|&delta| delta <= d);
                if k < acc.len() {
                    let r = (pts.values[i as usize] - pts.values[j as usize]).abs() / d.powf(rho);
                    acc[k] = acc[k].max(r);
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; sorted.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.max(y);
                }
                a
            },
        );
    let mut running = 0.0f64;
    let mut curve_sorted = Vec::with_capacity(sorted.len());
    for (k, &delta) in sorted.iter().enumerate() {
        running = running.max(best[k]);
        curve_sorted.push((delta, running));
    }
    let mut curve = vec![(0.0, 0.0); deltas.len()];
    for (pos, &orig) in order.iter().enumerate() {
        curve[orig] = curve_sorted[pos];
    }
    curve
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Space,
    Time,
}

/// Which increments enter [`fit_increment_exponent_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementFit {
    /// Row used for spatial increments; the last recorded time by default.
    pub time: Option<f64>,
    /// Largest separation included in the fit.
    pub max_separation: Option<f64>,
    pub min_ensemble: usize,
    pub min_scales: usize,
}

impl Default for IncrementFit {
    fn default() -> Self {
        IncrementFit {
            time: None,
            max_separation: None,
            min_ensemble: 100,
            min_scales: 4,
        }
    }
}

/// Empirical `E|X(p) − X(q)|^p` per distinct separation, as `(d, moment)`.
pub fn increment_moments(
    ensemble: &[FieldSample],
    direction: Direction,
    p: f64,
    opts: &IncrementFit,
) -> Result<Vec<(f64, f64)>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
    if let Some(f) = ensemble.iter().find(|f| !f.same_layout(first)) {
        return Err(Error::GridMismatch(format!(
            "ensemble member {:?} has a different layout",
            f.meta.seed
        )));
    }
    // pairs of flat indices grouped by separation
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let np = first.num_points();
    match direction {
        Direction::Space => {
            let row = match opts.time {
                Some(t) => first
                    .time_index(t)
                    .ok_or_else(|| Error::Parameter(format!("time {t} is not recorded")))?,
                None => first.num_times() - 1,
            };
            for a in 0..np {
                for b in a + 1..np {
                    let (x, y) = (first.eval_points[a], first.eval_points[b]);
                    let d = norm([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
                    pairs.push((d, row * np + a, row * np + b));
                }
            }
        }
        Direction::Time => {
            for r in 0..first.num_times() {
                for s in r + 1..first.num_times() {
                    let d = (first.times[s] - first.times[r]).abs();
                    for a in 0..np {
                        pairs.push((d, r * np + a, s * np + a));
                    }
                }
            }
        }
    }
    if let Some(cap) = opts.max_separation {
        pairs.retain(|q| q.0 <= cap * (1.0 + 1e-9));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for (d, i, j) in pairs {
        match groups.last_mut() {
            Some((d0, g)) if (d - *d0).abs() <= 1e-9 * d0.abs().max(1e-300) => g.push((i, j)),
            _ => groups.push((d, vec![(i, j)])),
        }
    }
    groups.retain(|g| g.0 > 0.0);
    Ok(groups
        .into_par_iter()
        .map(|(d, g)| {
            let total: f64 = ensemble
                .iter()
                .map(|f| g.iter().map(|&(i, j)| (f.values[i] - f.values[j]).abs().powf(p)).sum::<f64>())
                .sum();
            (d, total / (g.len() * ensemble.len()) as f64)
        })
        .collect())
}

/// `ρ̂ = slope / p` of `log E|ΔX|^p` against `log` separation, with
/// [`IncrementFit::default`].
pub fn fit_increment_exponent(ensemble: &[FieldSample], direction: Direction, p: f64) -> Result<ExponentEstimate> {
    fit_increment_exponent_with(ensemble, direction, p, &IncrementFit::default())
}

pub fn fit_increment_exponent_with(
    ensemble: &[FieldSample],
    direction: Direction,
    p: f64,
    opts: &IncrementFit,
) -> Result<ExponentEstimate> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("moment order {p} must be positive")));
    }
    if ensemble.len() < opts.min_ensemble {
        return Err(Error::InsufficientData(format!(
            "ensemble of {} fields, need at least {}",
            ensemble.len(),
            opts.min_ensemble
        )));
    }
    let moments = increment_moments(ensemble, direction, p, opts)?;
    if moments.len() < opts.min_scales {
        return Err(Error::InsufficientData(format!(
            "{} separation scales available, need {}",
            moments.len(),
            opts.min_scales
        )));
    }
    if moments.iter().all(|m| m.1 == 0.0) {
        return Ok(ExponentEstimate {
            exponent: 0.0,
            raw_slope: 0.0,
            intercept: f64::NEG_INFINITY,
            r_squared: 1.0,
            sample_points: moments,
        });
    }
    let fit = fit_power_law(&moments, f64::INFINITY)?;
    Ok(ExponentEstimate {
        exponent: fit.raw_slope / p,
        ..fit
    })
}
