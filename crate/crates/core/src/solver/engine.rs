//! Shared discretization of every mild-form equation.
//!
//! All variants have the form
//! `X(t_k, x) = X⁰(t_k, x) + Σ_{m < cut(k)} ∫ G(t_k − t_m, x − dy) F_m(y)`,
//! where `F_m` is a lattice field built from `X(t_m, ·)`:
//! `F_m = α(X)·ΔM_m + Δt·(β(X)·ẇ_m + δ(X)·h_m + b(X))`,
//! with `ẇ_m`, `h_m` the lattice fields representing the smoothed noise and
//! the control. The sphere integral uses nodes `x + sξ_q` with weights
//! `s·w_q/(4π)` and trilinear interpolation of `F_m`.

use crate::error::{Error, Result};
use crate::noise::{Lattice, NoiseGrid, Region};
use crate::wavekernel::{kirchhoff_unchecked, sphere_nodes, InitialData, SphereQuadrature};

use super::coefficient::Combination;
use super::shell::{Location, ShellKernels};
use super::sample::{FieldSample, SampleMeta};
use super::{AccessObserver, SolverConfig};

pub(crate) struct Problem<'a> {
    pub grid: &'a NoiseGrid,
    pub noise: Combination,
    pub smooth: Combination,
    pub control: Combination,
    pub drift: Combination,
    /// Lattice increments `ΔM_m`, time-major.
    pub increments: Option<&'a [f64]>,
    /// Per-step lattice fields of the smoothed noise and the control.
    pub smooth_fields: Option<Vec<Vec<f64>>>,
    pub control_fields: Option<Vec<Vec<f64>>>,
    pub ic: &'a InitialData,
    /// Number of leading steps entering the sum at step `k`.
    pub cut: Option<Vec<usize>>,
    pub meta: SampleMeta,
}

pub(crate) struct Outcome {
    pub sample: FieldSample,
    pub iterations: usize,
    pub final_delta: f64,
}

struct Context<'a, 'p> {
    problem: &'p Problem<'a>,
    config: &'p SolverConfig,
    lattice: &'a Lattice,
    sites: Vec<[f64; 3]>,
    /// Sites that must be resolved at each step (domain of dependence of
    /// the evaluation region, widened by the interpolation margin).
    active: Vec<Vec<usize>>,
    site_locations: Vec<Location>,
    kernels: ShellKernels<'p>,
    quad: &'p SphereQuadrature,
    record: Vec<usize>,
    steps: usize,
    dt: f64,
}

impl<'a, 'p> Context<'a, 'p> {
    fn new(problem: &'p Problem<'a>, config: &'p SolverConfig, quad: &'p SphereQuadrature) -> Result<Self> {
        let grid = problem.grid;
        let lattice = &grid.lattice;
        let steps = grid.num_steps;
        let dt = grid.dt();
        if config.eval_points.is_empty() {
            return Err(Error::Parameter("no evaluation points".into()));
        }
        let tol = 1e-9 * lattice.spacing;
        if let Some(p) = config.eval_points.iter().find(|p| !lattice.contains(**p, tol)) {
            return Err(Error::Parameter(format!(
                "evaluation point {p:?} lies outside the lattice box"
            )));
        }
        if !(config.t0 >= 0.0 && config.t0 <= grid.horizon) {
            return Err(Error::Parameter(format!(
                "t0 = {} outside [0, {}]",
                config.t0, grid.horizon
            )));
        }
        let record = match &config.record_steps {
            Some(r) => {
                if r.windows(2).any(|w| w[1] <= w[0]) || r.last().is_some_and(|&k| k > steps) {
                    return Err(Error::Parameter("record_steps must be increasing and ≤ num_steps".into()));
                }
                r.clone()
            }
            None => (0..=steps)
                .filter(|&k| grid.time(k) >= config.t0 - 1e-12 * grid.horizon)
                .collect(),
        };
        if record.is_empty() {
            return Err(Error::Parameter("no recorded time steps".into()));
        }
        let region = bounding_region(&config.eval_points);
        let margin = config
            .margin
            .unwrap_or(2.0 * lattice.spacing * 3f64.sqrt());
        let sites = lattice.sites();
        let dist: Vec<f64> = sites.iter().map(|&y| region.distance(y)).collect();
        let active = (0..=steps)
            .map(|k| {
                let reach = grid.horizon - grid.time(k) + margin;
                (0..sites.len()).filter(|&a| dist[a] <= reach).collect()
            })
            .collect();
        let mut ctx = Context {
            problem,
            config,
            lattice,
            sites,
            active,
            site_locations: Vec::new(),
            kernels: ShellKernels::new(lattice, quad, dt),
            quad,
            record,
            steps,
            dt,
        };
        ctx.site_locations = ctx.sites.iter().map(|&y| ctx.kernels.locate(y)).collect();
        Ok(ctx)
    }

    fn cut(&self, k: usize) -> usize {
        self.problem.cut.as_ref().map_or(k, |c| c[k])
    }

    fn initial(&self, k: usize, x: [f64; 3]) -> f64 {
        kirchhoff_unchecked(self.problem.ic, self.problem.grid.time(k), x, self.quad)
    }

    fn initial_lattice(&self, k: usize) -> Vec<f64> {
        if self.problem.ic.is_zero() {
            return vec![0.0; self.sites.len()];
        }
        self.sites.iter().map(|&y| self.initial(k, y)).collect()
    }

    /// `F_m`, with `state` the lattice values of `X(t_m, ·)` (ignored for
    /// state-independent coefficients).
    fn integrand(&self, m: usize, state: Option<&[f64]>) -> Vec<f64> {
        let p = self.problem;
        let n = self.sites.len();
        let dm = p.increments.map(|inc| &inc[m * n..(m + 1) * n]);
        let wn = p.smooth_fields.as_ref().map(|f| f[m].as_slice());
        let hf = p.control_fields.as_ref().map(|f| f[m].as_slice());
        let dt = self.dt;
        (0..n)
            .map(|a| {
                let u = state.map_or(0.0, |s| s[a]);
                let mut v = 0.0;
                if let (false, Some(dm)) = (p.noise.is_zero(), dm) {
                    v += p.noise.eval(u) * dm[a];
                }
                if let (false, Some(wn)) = (p.smooth.is_zero(), wn) {
                    v += dt * p.smooth.eval(u) * wn[a];
                }
                if let (false, Some(hf)) = (p.control.is_zero(), hf) {
                    v += dt * p.control.eval(u) * hf[a];
                }
                if !p.drift.is_zero() {
                    v += dt * p.drift.eval(u);
                }
                v
            })
            .collect()
    }

    fn state_independent(&self) -> bool {
        let p = self.problem;
        p.noise.is_constant() && p.smooth.is_constant() && p.control.is_constant() && p.drift.is_constant()
    }

    fn all_zero(&self) -> bool {
        let p = self.problem;
        p.noise.is_zero() && p.smooth.is_zero() && p.control.is_zero() && p.drift.is_zero()
    }

    /// Field value at `(t_k, x)` from the integrand history.
    fn evaluate(
        &self,
        history: &[Vec<f64>],
        k: usize,
        upto: usize,
        x: [f64; 3],
        observer: &mut Option<&mut dyn AccessObserver>,
    ) -> f64 {
        let mut v = self.initial(k, x);
        let at = self.kernels.locate(x);
        for (m, field) in history.iter().enumerate().take(upto) {
            if let Some(o) = observer.as_deref_mut() {
                o.read(k, m);
            }
            v += self.kernels.convolve(field, &at, k - m);
        }
        v
    }

    /// Lattice values at step `k` given the integrand history up to `k`.
    fn lattice_step(
        &self,
        history: &[Vec<f64>],
        k: usize,
        observer: &mut Option<&mut dyn AccessObserver>,
    ) -> Result<Vec<f64>> {
        let mut x = self.initial_lattice(k);
        for &a in &self.active[k] {
            let y = self.sites[a];
            for (m, field) in history.iter().enumerate().take(k) {
                if let Some(o) = observer.as_deref_mut() {
                    o.read(k, m);
                }
                x[a] += self.kernels.convolve(field, &self.site_locations[a], k - m);
            }
            if !x[a].is_finite() {
                return Err(Error::BlowUp {
                    t: self.problem.grid.time(k),
                    x: y,
                });
            }
        }
        Ok(x)
    }

    /// Evaluation-point rows for the recorded steps. Points that coincide
    /// with lattice sites reuse the lattice value when no delay applies.
    fn assemble(
        &self,
        history: &[Vec<f64>],
        lattice_values: Option<&[Vec<f64>]>,
        observer: &mut Option<&mut dyn AccessObserver>,
    ) -> Result<FieldSample> {
        let points = &self.config.eval_points;
        let on_site: Vec<Option<usize>> = points.iter().map(|&p| self.lattice.site_at(p)).collect();
        let mut values = Vec::with_capacity(self.record.len() * points.len());
        for &k in &self.record {
            let upto = self.cut(k);
            for (i, &p) in points.iter().enumerate() {
                let v = match (lattice_values, on_site[i]) {
                    (Some(lv), Some(a)) if upto == k && self.active[k].binary_search(&a).is_ok() => lv[k][a],
                    _ => self.evaluate(history, k, upto, p, observer),
                };
                if !v.is_finite() {
                    return Err(Error::BlowUp {
                        t: self.problem.grid.time(k),
                        x: p,
                    });
                }
                values.push(v);
            }
        }
        let grid = self.problem.grid;
        Ok(FieldSample {
            grid: grid.clone(),
            t0: self.config.t0,
            steps: self.record.clone(),
            times: self.record.iter().map(|&k| grid.time(k)).collect(),
            eval_points: points.clone(),
            values,
            meta: self.problem.meta.clone(),
        })
    }

    fn explicit(&self, observer: &mut Option<&mut dyn AccessObserver>) -> Result<FieldSample> {
        if self.state_independent() {
            let history: Vec<Vec<f64>> = (0..self.steps).map(|m| self.integrand(m, None)).collect();
            return self.assemble(&history, None, observer);
        }
        let mut history: Vec<Vec<f64>> = Vec::with_capacity(self.steps);
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.steps + 1);
        for k in 0..=self.steps {
            let x = self.lattice_step(&history, k, observer)?;
            if k < self.steps {
                history.push(self.integrand(k, Some(&x)));
            }
            values.push(x);
        }
        self.assemble(&history, Some(&values), observer)
    }

    fn picard(&self, observer: &mut Option<&mut dyn AccessObserver>) -> Result<Outcome> {
        let cfg = self.config;
        if self.state_independent() {
            let history: Vec<Vec<f64>> = (0..self.steps).map(|m| self.integrand(m, None)).collect();
            let sample = self.assemble(&history, None, observer)?;
            // Z¹ = X⁰ + (state-free integral) and Z² = Z¹
            let iterations = if self.all_zero() { 1 } else { 2 };
            return Ok(Outcome {
                sample,
                iterations,
                final_delta: 0.0,
            });
        }
        let mut z: Vec<Vec<f64>> = (0..=self.steps).map(|k| self.initial_lattice(k)).collect();
        let mut delta = f64::INFINITY;
        for iteration in 1..=cfg.picard_max_iter {
            let history: Vec<Vec<f64>> = (0..self.steps).map(|m| self.integrand(m, Some(&z[m]))).collect();
            let mut next = Vec::with_capacity(self.steps + 1);
            delta = 0.0;
            for k in 0..=self.steps {
                let x = self.lattice_step(&history, k, observer)?;
                for &a in &self.active[k] {
                    delta = f64::max(delta, (x[a] - z[k][a]).abs());
                }
                next.push(x);
            }
            z = next;
            if delta < cfg.picard_tol {
                let history: Vec<Vec<f64>> =
                    (0..self.steps).map(|m| self.integrand(m, Some(&z[m]))).collect();
                let sample = self.assemble(&history, Some(&z), observer)?;
                return Ok(Outcome {
                    sample,
                    iterations: iteration,
                    final_delta: delta,
                });
            }
        }
        Err(Error::IterationLimit {
            iterations: cfg.picard_max_iter,
            final_delta: delta,
        })
    }
}

fn bounding_region(points: &[[f64; 3]]) -> Region {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    Region { lo, hi }
}

pub(crate) fn run_explicit(
    problem: &Problem<'_>,
    config: &SolverConfig,
    mut observer: Option<&mut dyn AccessObserver>,
) -> Result<FieldSample> {
    let quad = sphere_nodes(config.sphere)?;
    Context::new(problem, config, &quad)?.explicit(&mut observer)
}

pub(crate) fn run_picard(
    problem: &Problem<'_>,
    config: &SolverConfig,
    mut observer: Option<&mut dyn AccessObserver>,
) -> Result<Outcome> {
    let quad = sphere_nodes(config.sphere)?;
    Context::new(problem, config, &quad)?.picard(&mut observer)
}
