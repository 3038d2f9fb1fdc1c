use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceSpec, KernelKind, RadialTable};
use crate::noise::{alpha_threshold, DiagonalRule, Lattice, NoiseGrid, Region};
use crate::solver::{Coefficient, Scheme, SolverConfig};
use crate::wavekernel::{InitialData, ScalarProfile, SphereRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VarianceOracle,
    IncrementExponent,
    WongzakaiGrowth,
    LocalizationProb,
    SupportProbe,
    Hypotheses,
    PicardCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::VarianceOracle,
        Experiment::IncrementExponent,
        Experiment::WongzakaiGrowth,
        Experiment::LocalizationProb,
        Experiment::SupportProbe,
        Experiment::Hypotheses,
        Experiment::PicardCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::VarianceOracle => "variance-oracle",
            Experiment::IncrementExponent => "increment-exponent",
            Experiment::WongzakaiGrowth => "wongzakai-growth",
            Experiment::LocalizationProb => "localization-prob",
            Experiment::SupportProbe => "support-probe",
            Experiment::Hypotheses => "hypotheses",
            Experiment::PicardCheck => "picard-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown experiment `{s}`")]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `riesz` or `tabulated`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Two-column `r f(r)` text file for tabulated kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    pub reg_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub num_steps: usize,
    /// Sites per axis of the cubic noise lattice.
    pub lattice_points: usize,
    pub lattice_half_width: f64,
    pub num_modes: usize,
    pub diagonal: DiagonalRule,
}

/// The compact set `K`, sampled on a cubic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    /// `A` (`σ` for the support probe).
    pub noise_coef: Coefficient,
    pub smooth_coef: Coefficient,
    pub control_coef: Coefficient,
    pub drift: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub sphere: SphereRule,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub position: ScalarProfile,
    pub velocity: ScalarProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicas: usize,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub n_levels: Vec<u32>,
    pub alpha: f64,
    pub rho: f64,
    /// Exceedance threshold; the support probe defaults it to the median
    /// distance at the first level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub t0: f64,
    /// Times at which the variance oracle is compared.
    pub times: Vec<f64>,
    /// Kernel exponents scanned by the hypotheses experiment.
    pub betas: Vec<f64>,
    /// Moment orders of the increment-exponent fit.
    pub moments: Vec<f64>,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub region: RegionConfig,
    pub equation: EquationConfig,
    pub solver: SolverSection,
    pub initial: InitialConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: 20_240_601,
            replicas: 200,
            output_dir: PathBuf::from("runs").join(experiment.name()),
            workers: 0,
            n_levels: vec![2, 3, 4, 5],
            alpha: 2.0,
            rho: 0.25,
            lambda: None,
            t0: 0.25,
            times: vec![0.5, 1.0],
            betas: vec![0.5, 1.0, 1.5],
            moments: vec![2.0, 4.0],
            kernel: KernelConfig {
                kind: "riesz".into(),
                beta: Some(1.0),
                table: None,
                reg_radius: 1e-3,
            },
            grid: GridConfig {
                horizon: 1.0,
                num_steps: 64,
                lattice_points: 9,
                lattice_half_width: 1.5,
                num_modes: 8,
                diagonal: DiagonalRule::Matched,
            },
            region: RegionConfig {
                half_width: 0.5,
                points: 5,
            },
            equation: EquationConfig {
                noise_coef: Coefficient::constant(1.0),
                smooth_coef: Coefficient::zero(),
                control_coef: Coefficient::zero(),
                drift: Coefficient::zero(),
            },
            solver: SolverSection {
                sphere: SphereRule::Fibonacci(256),
                scheme: Scheme::Explicit,
                picard_tol: 1e-8,
                picard_max_iter: 50,
            },
            initial: InitialConfig {
                position: ScalarProfile::Zero,
                velocity: ScalarProfile::Zero,
            },
        };
        match experiment {
            Experiment::VarianceOracle | Experiment::IncrementExponent => {
                // spacing 0.25 with K's grid on lattice sites and the whole
                // domain of dependence of K inside the box
                c.grid.lattice_points = 13;
                c.grid.num_modes = 0;
                c.replicas = if experiment == Experiment::VarianceOracle { 2000 } else { 1000 };
                c.n_levels = vec![];
            }
            Experiment::WongzakaiGrowth => {
                c.replicas = 500;
                c.n_levels = vec![2, 3, 4, 5, 6];
                c.grid.lattice_points = 2;
                c.grid.lattice_half_width = 0.5;
            }
            Experiment::LocalizationProb => {
                c.replicas = 5000;
                c.n_levels = vec![2, 3, 4];
                c.grid.lattice_points = 2;
                c.grid.lattice_half_width = 0.5;
            }
            Experiment::SupportProbe => {
                c.equation.noise_coef = Coefficient::Sine {
                    offset: 1.0,
                    amplitude: 0.5,
                    frequency: 1.0,
                };
            }
            Experiment::Hypotheses => {
                c.replicas = 1;
                c.n_levels = vec![];
            }
            Experiment::PicardCheck => {
                c.replicas = 5;
                c.n_levels = vec![2];
                c.grid.num_steps = 16;
                c.grid.lattice_points = 5;
                c.grid.lattice_half_width = 1.0;
                c.grid.num_modes = 4;
                c.region = RegionConfig {
                    half_width: 0.25,
                    points: 3,
                };
                c.solver.sphere = SphereRule::Fibonacci(64);
                // iterates settle exactly after num_steps + 1 sweeps
                c.solver.picard_tol = 1e-12;
            }
        }
        c
    }

    /// Parses a TOML document over the preset of its `experiment`. Unknown
    /// keys and every invalid field are reported together.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let experiment = match user.get("experiment") {
            Some(toml::Value::String(s)) => s.parse::<Experiment>()?,
            Some(other) => return Err(Error::Config(vec![format!("experiment must be a string, got {other}")])),
            None => return Err(Error::Config(vec!["missing `experiment`".into()])),
        };
        Self::overlay(experiment, user)
    }

    /// As [`ExperimentConfig::from_toml`] with the experiment fixed by the
    /// caller; a conflicting `experiment` key is an error.
    pub fn from_toml_for(experiment: Experiment, text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        if let Some(v) = user.get("experiment") {
            if v.as_str() != Some(experiment.name()) {
                return Err(Error::Config(vec![format!(
                    "config is for experiment {v}, but `{experiment}` was requested"
                )]));
            }
        }
        Self::overlay(experiment, user)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn overlay(experiment: Experiment, user: toml::Table) -> Result<Self> {
        let mut merged = match toml::Value::try_from(Self::preset(experiment)) {
            Ok(toml::Value::Table(t)) => t,
            Ok(_) => unreachable!("a struct serializes to a table"),
            Err(e) => return Err(Error::Serde(e.to_string())),
        };
        merge(&mut merged, user);
        let config: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Every violated constraint, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let g = &self.grid;
        need(self.replicas >= 1, format!("replicas = {} must be at least 1", self.replicas));
        need(
            self.n_levels.windows(2).all(|w| w[0] < w[1]),
            format!("n_levels {:?} must be strictly ascending", self.n_levels),
        );
        need(self.n_levels.iter().all(|&n| n >= 1), "n_levels must be at least 1".into());
        need(
            self.alpha > alpha_threshold(),
            format!("alpha = {} must exceed √(2 ln 2) ≈ {:.4}", self.alpha, alpha_threshold()),
        );
        need(self.rho > 0.0 && self.rho < 1.0, format!("rho = {} must lie in (0, 1)", self.rho));
        if let Some(l) = self.lambda {
            need(l > 0.0, format!("lambda = {l} must be positive"));
        }
        need(g.horizon > 0.0 && g.horizon.is_finite(), format!("grid.horizon = {} must be positive", g.horizon));
        need(g.num_steps >= 1, "grid.num_steps must be at least 1".into());
        need(g.lattice_points >= 1, "grid.lattice_points must be at least 1".into());
        need(
            g.lattice_half_width > 0.0,
            format!("grid.lattice_half_width = {} must be positive", g.lattice_half_width),
        );
        let sites = g.lattice_points.pow(3);
        need(
            g.num_modes <= sites,
            format!("grid.num_modes = {} exceeds the {sites} lattice sites", g.num_modes),
        );
        need(
            self.t0 >= 0.0 && self.t0 <= g.horizon,
            format!("t0 = {} must lie in [0, horizon]", self.t0),
        );
        need(self.region.points >= 1, "region.points must be at least 1".into());
        need(self.region.half_width >= 0.0, "region.half_width must be nonnegative".into());
        need(
            self.region.half_width <= g.lattice_half_width,
            "region must lie inside the lattice box".into(),
        );
        need(self.kernel.reg_radius > 0.0, format!("kernel.reg_radius = {} must be positive", self.kernel.reg_radius));
        match self.kernel.kind.as_str() {
            "riesz" => need(
                self.kernel.beta.is_some_and(|b| b > 0.0 && b < 2.0),
                format!("kernel.beta = {:?} must lie in (0, 2) for a Riesz kernel", self.kernel.beta),
            ),
            "tabulated" => need(self.kernel.table.is_some(), "kernel.table is required for a tabulated kernel".into()),
            other => need(false, format!("kernel.kind `{other}` is not riesz or tabulated")),
        }
        need(self.solver.picard_tol > 0.0, "solver.picard_tol must be positive".into());
        need(self.solver.picard_max_iter >= 1, "solver.picard_max_iter must be at least 1".into());
        for (name, c) in [
            ("noise_coef", self.equation.noise_coef),
            ("smooth_coef", self.equation.smooth_coef),
            ("control_coef", self.equation.control_coef),
            ("drift", self.equation.drift),
        ] {
            if let Err(e) = c.verify_lipschitz(10_000, 10.0, self.seed) {
                errs.push(format!("equation.{name}: {e}"));
            }
        }
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let uses_levels = matches!(
            self.experiment,
            Experiment::WongzakaiGrowth | Experiment::LocalizationProb | Experiment::SupportProbe | Experiment::PicardCheck
        );
        if uses_levels {
            need(!self.n_levels.is_empty(), format!("{} needs at least one level", self.experiment));
            if let Some(&top) = self.n_levels.last() {
                need(
                    top < 31 && g.num_steps % (1usize << top.min(30)) == 0,
                    format!("grid.num_steps = {} must be a multiple of 2^{top}", g.num_steps),
                );
                need(
                    g.num_modes >= top as usize,
                    format!("grid.num_modes = {} must be at least the top level {top}", g.num_modes),
                );
            }
        }
        match self.experiment {
            Experiment::VarianceOracle => {
                need(!self.times.is_empty(), "times must not be empty".into());
                for &t in &self.times {
                    let k = t / g.horizon * g.num_steps as f64;
                    need(
                        t > 0.0 && t <= g.horizon && (k - k.round()).abs() < 1e-9,
                        format!("time {t} is not a positive grid time"),
                    );
                }
            }
            Experiment::IncrementExponent => {
                need(!self.moments.is_empty(), "moments must not be empty".into());
                need(self.moments.iter().all(|&p| p > 0.0), "moments must be positive".into());
            }
            Experiment::Hypotheses => {
                need(!self.betas.is_empty(), "betas must not be empty".into());
                need(
                    self.betas.iter().all(|&b| b > 0.0 && b < 2.0),
                    format!("betas {:?} must lie in (0, 2)", self.betas),
                );
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn covariance(&self) -> Result<CovarianceSpec> {
        self.covariance_with_beta(self.kernel.beta.unwrap_or(1.0))
    }

    pub(crate) fn covariance_with_beta(&self, beta: f64) -> Result<CovarianceSpec> {
        let kind = match self.kernel.kind.as_str() {
            "tabulated" => {
                let path = self.kernel.table.as_ref().ok_or_else(|| Error::Config(vec!["kernel.table missing".into()]))?;
                KernelKind::Tabulated {
                    table: RadialTable::from_file(path)?,
                }
            }
            _ => KernelKind::Riesz { beta },
        };
        let spec = CovarianceSpec {
            kind,
            reg_radius: self.kernel.reg_radius,
            horizon: self.grid.horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise_grid(&self) -> Result<NoiseGrid> {
        let g = &self.grid;
        NoiseGrid::new(
            g.horizon,
            g.num_steps,
            Lattice::cube([0.0; 3], g.lattice_half_width, g.lattice_points)?,
        )
    }

    pub fn region(&self) -> Region {
        Region::cube([0.0; 3], self.region.half_width)
    }

    pub fn eval_points(&self) -> Vec<[f64; 3]> {
        self.region().grid(self.region.points)
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData::from_profiles(self.initial.position, self.initial.velocity)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            sphere: self.solver.sphere,
            scheme: self.solver.scheme,
            picard_tol: self.solver.picard_tol,
            picard_max_iter: self.solver.picard_max_iter,
            eval_points: self.eval_points(),
            t0: self.t0,
            ..Default::default()
        }
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if !is_tagged(b) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Internally tagged values (coefficients, profiles, diagonal rules) are
/// replaced as a whole so that a new `kind` never inherits stale fields.
fn is_tagged(t: &toml::Table) -> bool {
    t.contains_key("kind") && !t.contains_key("reg_radius") || t.contains_key("rule")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::preset(e);
            c.validate().unwrap();
            let text = c.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{e}");
        }
    }

    #[test]
    fn overrides_merge_into_the_preset() {
        let c = ExperimentConfig::from_toml(
            r#"
            experiment = "support-probe"
            replicas = 7
            [grid]
            num_steps = 32
            [equation]
            drift = { kind = "affine", slope = 0.5, intercept = 0.0 }
            "#,
        )
        .unwrap();
        assert_eq!(c.replicas, 7);
        assert_eq!(c.grid.num_steps, 32);
        assert_eq!(c.grid.lattice_points, 9);
        assert_eq!(c.equation.drift, Coefficient::Affine { slope: 0.5, intercept: 0.0 });
        assert!(matches!(c.equation.noise_coef, Coefficient::Sine { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("experiment = \"hypotheses\"\nreplica = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let err = ExperimentConfig::from_toml("experiment = \"hypotheses\"\n[grid]\nsteps = 3\n").unwrap_err();
        assert!(err.to_string().contains("steps"), "{err}");
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let err = ExperimentConfig::from_toml(
            r#"
            experiment = "localization-prob"
            replicas = 0
            alpha = 1.0
            rho = 1.5
            n_levels = [3, 2]
            "#,
        )
        .unwrap_err();
        let Error::Config(list) = err else { panic!("expected config errors") };
        for key in ["replicas", "alpha", "rho", "n_levels"] {
            assert!(list.iter().any(|m| m.contains(key)), "{key} missing from {list:?}");
        }
    }

    #[test]
    fn alignment_and_modes_are_checked() {
        let err = ExperimentConfig::from_toml(
            "experiment = \"wongzakai-growth\"\nn_levels = [2, 7]\n[grid]\nnum_steps = 64\nnum_modes = 4\n",
        )
        .unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.iter().any(|m| m.contains("multiple of 2^7")));
        assert!(list.iter().any(|m| m.contains("num_modes")));
    }

    #[test]
    fn conflicting_experiment_is_rejected() {
        assert!(ExperimentConfig::from_toml_for(Experiment::Hypotheses, "experiment = \"picard-check\"").is_err());
        assert!(ExperimentConfig::from_toml_for(Experiment::Hypotheses, "replicas = 2").is_ok());
    }
}
