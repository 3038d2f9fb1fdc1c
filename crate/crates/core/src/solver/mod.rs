//! Mild-form solvers: the base equation, the full/reference pair driven by
//! smoothed noise and a control, their delayed versions, the deterministic
//! skeleton and the shifted equation.
//!
//! Every variant shares one causal recursion (see [`engine`]); the variants
//! only differ in which coefficient multiplies which driver.

mod coefficient;
mod engine;
mod sample;
mod shell;

use serde::{Deserialize, Serialize};

pub use coefficient::Coefficient;
pub use sample::{FieldSample, SampleMeta};

use crate::error::{Error, Result};
use crate::noise::{build_smoothed, ControlH, ModeBasis, NoiseGrid, NoisePath, SmoothedNoise};
use crate::wavekernel::{InitialData, SphereRule};
use coefficient::Combination;
use engine::Problem;

/// Which mild equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `A(X)·dM + b(X)`.
    Base,
    /// `A(X)·dM + B(X)·ẇⁿ + D(X)·h + b(X)`.
    Full,
    /// `(A + B)(X)·dM + D(X)·h + b(X)`.
    Reference,
    /// `Full` with the stochastic sums stopped at the delayed time `t_n`.
    DelayedN { level: u32 },
    /// `Reference` with the stochastic sums stopped at `t_n`.
    DelayedRef { level: u32 },
    /// Deterministic `A(Φ)·h + b(Φ)`.
    Skeleton,
    /// `A(X)·(dM + (h − ẇⁿ)dt) + b(X)`.
    Shifted,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Full => "full",
            Variant::Reference => "reference",
            Variant::DelayedN { .. } => "delayed_n",
            Variant::DelayedRef { .. } => "delayed_ref",
            Variant::Skeleton => "skeleton",
            Variant::Shifted => "shifted",
        }
    }

    pub fn level(&self) -> Option<u32> {
        match *self {
            Variant::DelayedN { level } | Variant::DelayedRef { level } => Some(level),
            _ => None,
        }
    }
}

/// Coefficients and variant of one equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    /// `A`, multiplying the noise (and `σ` in the skeleton/shifted forms).
    pub noise_coef: Coefficient,
    /// `B`, multiplying the smoothed noise.
    #[serde(default)]
    pub smooth_coef: Coefficient,
    /// `D`, multiplying the control.
    #[serde(default)]
    pub control_coef: Coefficient,
    /// `b`.
    #[serde(default)]
    pub drift: Coefficient,
    pub variant: Variant,
}

impl EquationSpec {
    pub fn new(variant: Variant) -> Self {
        EquationSpec {
            noise_coef: Coefficient::zero(),
            smooth_coef: Coefficient::zero(),
            control_coef: Coefficient::zero(),
            drift: Coefficient::zero(),
            variant,
        }
    }

    pub fn with(mut self, a: Coefficient, b: Coefficient, d: Coefficient, drift: Coefficient) -> Self {
        self.noise_coef = a;
        self.smooth_coef = b;
        self.control_coef = d;
        self.drift = drift;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Checks every declared Lipschitz constant on `probes` random pairs.
    pub fn verify(&self, probes: usize, seed: u64) -> Result<()> {
        for (i, c) in self.coefficients().iter().enumerate() {
            c.verify_lipschitz(probes, 10.0, seed.wrapping_add(i as u64))?;
        }
        Ok(())
    }

    fn coefficients(&self) -> [Coefficient; 4] {
        [self.noise_coef, self.smooth_coef, self.control_coef, self.drift]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    Picard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sphere: SphereRule,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Points at which the field is reported.
    pub eval_points: Vec<[f64; 3]>,
    /// Rows are recorded for `t_k ≥ t0` unless `record_steps` is given.
    pub t0: f64,
    pub record_steps: Option<Vec<usize>>,
    /// Extra reach of the resolved lattice region beyond the domain of
    /// dependence; defaults to two lattice diagonals.
    pub margin: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sphere: SphereRule::default(),
            scheme: Scheme::Explicit,
            picard_tol: 1e-8,
            picard_max_iter: 50,
            eval_points: vec![[0.0; 3]],
            t0: 0.0,
            record_steps: None,
            margin: None,
        }
    }
}

impl SolverConfig {
    pub fn at_points(points: Vec<[f64; 3]>) -> Self {
        SolverConfig {
            eval_points: points,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::Parameter(format!("picard_tol = {} must be positive", self.picard_tol)));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Parameter("picard_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Instrumentation hook: called whenever the value at step `target` reads
/// the integrand (noise increment and field value) of step `source`.
pub trait AccessObserver {
    fn read(&mut self, target: usize, source: usize);
}

/// `(t̲_n, t_n)`: the last dyadic point `k2⁻ⁿT ≤ t` with `1 ≤ k ≤ 2ⁿ − 1`
/// (zero when there is none) and that point moved back by `2⁻ⁿT`, floored
/// at zero.
pub fn dyadic_delay(t: f64, n: u32, horizon: f64) -> (f64, f64) {
    let parts = (1u64 << n) as f64;
    let k = ((t * parts / horizon + 1e-12).floor()).min(parts - 1.0).max(0.0);
    let under = if k >= 1.0 { k * horizon / parts } else { 0.0 };
    let tn = (under - horizon / parts).max(0.0);
    (under, tn)
}

/// Picard result: field, iteration count and the last sup-norm increment.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub sample: FieldSample,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Integrates the base, full, reference or delayed equation driven by
/// `path`, optionally with smoothed noise `smoothed` and control `h`.
pub fn solve_mild(
    eq: &EquationSpec,
    path: &NoisePath,
    smoothed: Option<&SmoothedNoise>,
    h: Option<&ControlH>,
    ic: &InitialData,
    config: &SolverConfig,
) -> Result<FieldSample> {
    solve_mild_observed(eq, path, smoothed, h, ic, config, None)
}

/// [`solve_mild`] with an access observer.
pub fn solve_mild_observed(
    eq: &EquationSpec,
    path: &NoisePath,
    smoothed: Option<&SmoothedNoise>,
    h: Option<&ControlH>,
    ic: &InitialData,
    config: &SolverConfig,
    observer: Option<&mut dyn AccessObserver>,
) -> Result<FieldSample> {
    config.validate()?;
    let problem = mild_problem(eq, path, smoothed, h, ic)?;
    match config.scheme {
        Scheme::Explicit => engine::run_explicit(&problem, config, observer),
        Scheme::Picard => Ok(engine::run_picard(&problem, config, observer)?.sample),
    }
}

/// Runs the Picard iteration on the same discretization as [`solve_mild`],
/// regardless of `config.scheme`.
pub fn picard_solve(
    eq: &EquationSpec,
    path: &NoisePath,
    smoothed: Option<&SmoothedNoise>,
    h: Option<&ControlH>,
    ic: &InitialData,
    config: &SolverConfig,
) -> Result<PicardOutcome> {
    config.validate()?;
    let problem = mild_problem(eq, path, smoothed, h, ic)?;
    let out = engine::run_picard(&problem, config, None)?;
    Ok(PicardOutcome {
        sample: out.sample,
        iterations: out.iterations,
        final_delta: out.final_delta,
    })
}

/// Deterministic skeleton `Φʰ = X⁰ + ∫G·A(Φ)h + ∫G·b(Φ)` on `grid`, with
/// the control represented on `basis`.
pub fn solve_skeleton(
    eq: &EquationSpec,
    h: &ControlH,
    basis: &ModeBasis,
    grid: &NoiseGrid,
    ic: &InitialData,
    config: &SolverConfig,
) -> Result<FieldSample> {
    config.validate()?;
    if eq.variant != Variant::Skeleton {
        return Err(Error::Parameter(format!(
            "solve_skeleton needs the skeleton variant, got {}",
            eq.variant.name()
        )));
    }
    check_control(h, grid, basis)?;
    let problem = Problem {
        grid,
        noise: Combination::default(),
        smooth: Combination::default(),
        control: Combination::of(&[(1.0, eq.noise_coef)]),
        drift: Combination::of(&[(1.0, eq.drift)]),
        increments: None,
        smooth_fields: None,
        control_fields: Some(control_fields(h, basis)),
        ic,
        cut: None,
        meta: SampleMeta {
            seed: None,
            variant: eq.variant.name().into(),
            level: None,
        },
    };
    run(&problem, config)
}

/// Shifted equation `A(v)·(dM + (h − ẇⁿ)dt) + b(v)`, with `ẇⁿ` built from
/// `path` at level `n`.
pub fn solve_shifted(
    eq: &EquationSpec,
    path: &NoisePath,
    h: &ControlH,
    n: u32,
    ic: &InitialData,
    config: &SolverConfig,
) -> Result<FieldSample> {
    config.validate()?;
    if eq.variant != Variant::Shifted {
        return Err(Error::Parameter(format!(
            "solve_shifted needs the shifted variant, got {}",
            eq.variant.name()
        )));
    }
    let basis = require_basis(path)?;
    check_control(h, &path.grid, basis)?;
    let smoothed = build_smoothed(path, n)?;
    let problem = Problem {
        grid: &path.grid,
        noise: Combination::of(&[(1.0, eq.noise_coef)]),
        smooth: Combination::of(&[(-1.0, eq.noise_coef)]),
        control: Combination::of(&[(1.0, eq.noise_coef)]),
        drift: Combination::of(&[(1.0, eq.drift)]),
        increments: Some(&path.increments),
        smooth_fields: Some(smoothed_fields(&smoothed, &path.grid, basis)),
        control_fields: Some(control_fields(h, basis)),
        ic,
        cut: None,
        meta: SampleMeta {
            seed: Some(path.seed),
            variant: eq.variant.name().into(),
            level: Some(n),
        },
    };
    run(&problem, config)
}

fn run(problem: &Problem<'_>, config: &SolverConfig) -> Result<FieldSample> {
    match config.scheme {
        Scheme::Explicit => engine::run_explicit(problem, config, None),
        Scheme::Picard => Ok(engine::run_picard(problem, config, None)?.sample),
    }
}

fn mild_problem<'a>(
    eq: &EquationSpec,
    path: &'a NoisePath,
    smoothed: Option<&SmoothedNoise>,
    h: Option<&ControlH>,
    ic: &'a InitialData,
) -> Result<Problem<'a>> {
    let grid = &path.grid;
    let (a, b, d) = (eq.noise_coef, eq.smooth_coef, eq.control_coef);
    let (noise, smooth, control, uses_smooth) = match eq.variant {
        Variant::Base => {
            if smoothed.is_some() || h.is_some() {
                return Err(Error::Parameter("the base equation takes neither smoothed noise nor a control".into()));
            }
            (Combination::of(&[(1.0, a)]), Combination::default(), Combination::default(), false)
        }
        Variant::Full | Variant::DelayedN { .. } => (
            Combination::of(&[(1.0, a)]),
            Combination::of(&[(1.0, b)]),
            Combination::of(&[(1.0, d)]),
            true,
        ),
        Variant::Reference | Variant::DelayedRef { .. } => {
            if smoothed.is_some() {
                return Err(Error::Parameter("the reference equation takes no smoothed noise".into()));
            }
            (
                Combination::of(&[(1.0, a), (1.0, b)]),
                Combination::default(),
                Combination::of(&[(1.0, d)]),
                false,
            )
        }
        Variant::Skeleton | Variant::Shifted => {
            return Err(Error::Parameter(format!(
                "the {} equation has its own entry point",
                eq.variant.name()
            )))
        }
    };
    let level = eq.variant.level();
    let smooth_fields = if uses_smooth && !smooth.is_zero() {
        let w = smoothed.ok_or_else(|| Error::Parameter(format!("the {} equation needs smoothed noise", eq.variant.name())))?;
        if let Some(n) = level {
            if w.level != n {
                return Err(Error::Parameter(format!("smoothed noise has level {}, equation {n}", w.level)));
            }
        }
        Some(smoothed_fields(w, grid, require_basis(path)?))
    } else {
        None
    };
    let control_fields = match h {
        Some(h) if !control.is_zero() => {
            let basis = require_basis(path)?;
            check_control(h, grid, basis)?;
            Some(control_fields(h, basis))
        }
        _ => None,
    };
    let cut = match level {
        Some(n) => {
            grid.steps_per_dyadic(n)?;
            let dt = grid.dt();
            Some(
                (0..=grid.num_steps)
                    .map(|k| {
                        let (_, tn) = dyadic_delay(grid.time(k), n, grid.horizon);
                        ((tn / dt).round() as usize).min(k)
                    })
                    .collect(),
            )
        }
        None => None,
    };
    Ok(Problem {
        grid,
        noise,
        smooth,
        control,
        drift: Combination::of(&[(1.0, eq.drift)]),
        increments: Some(&path.increments),
        smooth_fields,
        control_fields,
        ic,
        cut,
        meta: SampleMeta {
            seed: Some(path.seed),
            variant: eq.variant.name().into(),
            level,
        },
    })
}

fn require_basis(path: &NoisePath) -> Result<&ModeBasis> {
    path.basis
        .as_deref()
        .ok_or_else(|| Error::Parameter("the noise path carries no eigenbasis".into()))
}

fn check_control(h: &ControlH, grid: &NoiseGrid, basis: &ModeBasis) -> Result<()> {
    if h.num_steps != grid.num_steps || (h.horizon - grid.horizon).abs() > 1e-12 * grid.horizon {
        return Err(Error::GridMismatch(format!(
            "control has {} steps on [0, {}], grid has {} on [0, {}]",
            h.num_steps, h.horizon, grid.num_steps, grid.horizon
        )));
    }
    if h.num_modes() > basis.num_modes() {
        return Err(Error::Parameter(format!(
            "control has {} modes, basis only {}",
            h.num_modes(),
            basis.num_modes()
        )));
    }
    if basis.num_sites != grid.num_sites() {
        return Err(Error::GridMismatch("basis does not live on the grid lattice".into()));
    }
    Ok(())
}

fn control_fields(h: &ControlH, basis: &ModeBasis) -> Vec<Vec<f64>> {
    (0..h.num_steps).map(|m| h.lattice_field(basis, m)).collect()
}

fn smoothed_fields(w: &SmoothedNoise, grid: &NoiseGrid, basis: &ModeBasis) -> Vec<Vec<f64>> {
    (0..grid.num_steps)
        .map(|m| w.lattice_field(basis, grid.time(m)))
        .collect()
}
