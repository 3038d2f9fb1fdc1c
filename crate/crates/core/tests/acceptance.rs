//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line on stderr (uncaptured) and fails on `FAIL`.
//!
//! Run with `cargo test --release --test acceptance`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, Normal};

use stochwave::harness::{self, Experiment, ExperimentConfig, RunRecord, REPLICAS_FILE, SUMMARY_FILE};
use stochwave::holder::{holder_distance, holder_norm};
use stochwave::kernels::CovarianceSpec;
use stochwave::noise::{
    build_smoothed, girsanov_shift, ControlH, DiagonalRule, Lattice, NoiseGrid, NoiseSampler,
};
use stochwave::solver::{
    solve_mild, solve_mild_observed, solve_shifted, AccessObserver, Coefficient, EquationSpec, FieldSample,
    SolverConfig, Variant,
};
use stochwave::wavekernel::{kirchhoff_ic, sphere_nodes, InitialData, ScalarProfile, SphereRule};

fn verdict(id: u32, name: &str, passed: bool, detail: &str, started: Instant) {
    let line = format!(
        "{} criterion {id:>2} ({name}): {detail} [{:.1} s]\n",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    // written past the test harness's capture so that every run shows it
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{line}");
}

fn run(experiment: Experiment) -> RunRecord {
    let record = harness::run(&ExperimentConfig::preset(experiment)).unwrap();
    assert!(record.is_consistent());
    assert_eq!(record.excluded, 0, "blow-ups in {experiment}");
    record
}

fn aggregate(r: &RunRecord, name: &str) -> f64 {
    r.aggregate(name).and_then(|a| a.value).unwrap_or_else(|| panic!("missing aggregate {name}"))
}

/// `Var X(t, 0)` for the additive equation with a Riesz kernel, from the
/// physical-space form `∫_0^t s² E|ξ − η|^{-β} s^{-β} ds` with `ξ, η`
/// independent uniform on the unit sphere. `|ξ − η|² = 2 − 2c` with `c`
/// uniform on `[−1, 1]`, so `E|ξ − η|^{-β} = 2^{1−β}/(2 − β)`.
fn physical_space_variance(beta: f64, t: f64) -> f64 {
    2f64.powf(1.0 - beta) / (2.0 - beta) * t.powf(3.0 - beta) / (3.0 - beta)
}

#[test]
fn criterion_01_variance_oracle() {
    let start = Instant::now();
    let r = run(Experiment::VarianceOracle);
    let mut ok = true;
    let mut detail = Vec::new();
    for t in [0.5, 1.0] {
        let v = aggregate(&r, &format!("variance_t{t}"));
        let oracle = physical_space_variance(1.0, t);
        let rel = (v - oracle).abs() / oracle;
        ok &= rel <= 0.10;
        detail.push(format!("t={t}: {v:.4} vs {oracle:.4} (rel {rel:.3})"));
    }
    verdict(1, "additive variance oracle", ok, &detail.join(", "), start);
}

#[test]
fn criterion_02_spatial_holder_exponent() {
    let start = Instant::now();
    let r = run(Experiment::IncrementExponent);
    let rho = aggregate(&r, "rho_hat_space_p2");
    verdict(
        2,
        "spatial increment exponent",
        (0.4..=0.6).contains(&rho),
        &format!("rho_hat = {rho:.4}, window [0.4, 0.6], edge (2 - beta)/2 = 0.5"),
        start,
    );
}

#[test]
fn criterion_03_localization_probability() {
    let start = Instant::now();
    let r = run(Experiment::LocalizationProb);
    let (alpha, horizon) = (2.0f64, 1.0f64);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut ok = true;
    let mut complements = Vec::new();
    let mut detail = Vec::new();
    for n in [2u32, 3, 4] {
        // n·2ⁿ independent N(0, 2⁻ⁿT) increments, each below α n^{1/2} 2^{-n/2}
        let sd = (horizon / 2f64.powi(n as i32)).sqrt();
        let level = alpha * (n as f64).sqrt() * 2f64.powf(-(n as f64) / 2.0);
        let single = 2.0 * normal.cdf(level / sd) - 1.0;
        let oracle = single.powi((n as i32) << n);
        complements.push(1.0 - oracle);
        let ci = r.aggregate(&format!("p_l_n{n}")).unwrap().interval.unwrap();
        let inside = ci.contains(oracle);
        ok &= inside;
        detail.push(format!("n={n}: {oracle:.4} in [{:.4}, {:.4}] {inside}", ci.low, ci.high));
    }
    let decreasing = complements.windows(2).all(|w| w[1] < w[0]);
    verdict(
        3,
        "localization probability",
        ok && decreasing,
        &format!("{}; complement decreasing {decreasing}", detail.join(", ")),
        start,
    );
}

#[test]
fn criterion_04_wongzakai_growth() {
    let start = Instant::now();
    let r = run(Experiment::WongzakaiGrowth);
    let mut ratios = Vec::new();
    let mut envelope_ok = true;
    let mut detail = Vec::new();
    for n in 2u32..=6 {
        let rate = (n as f64).sqrt() * 2f64.powf(n as f64 / 2.0);
        let l2 = aggregate(&r, &format!("l2_norm_n{n}"));
        let local = aggregate(&r, &format!("localized_l2_norm_n{n}"));
        ratios.push(l2 / rate);
        envelope_ok &= local <= n as f64 * rate;
        // E‖wⁿ‖² = n(2ⁿ − 1): n modes, 2ⁿ − 1 delayed intervals, unit-variance slopes
        let exact = (n as f64 * (2f64.powi(n as i32) - 1.0)).sqrt();
        detail.push(format!("n={n}: {l2:.3} (exact {exact:.3})"));
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        4,
        "Wong-Zakai growth",
        spread < 2.0 && envelope_ok,
        &format!("{}; ratio spread {spread:.3}; localized within envelope {envelope_ok}", detail.join(", ")),
        start,
    );
}

#[test]
fn criterion_05_hypothesis_exponents() {
    let start = Instant::now();
    let r = run(Experiment::Hypotheses);
    let rows = &r.summary_table;
    let (cb, cq, cr, ce) = (
        rows.column("beta").unwrap(),
        rows.column("quantity").unwrap(),
        rows.column("raw_slope").unwrap(),
        rows.column("exponent").unwrap(),
    );
    let mut ok = true;
    let mut detail = Vec::new();
    for row in &rows.rows {
        let beta = row[cb].as_f64().unwrap();
        let stochwave::harness::Cell::Text(q) = &row[cq] else { panic!("quantity") };
        let (raw, fitted) = (row[cr].as_f64().unwrap(), row[ce].as_f64().unwrap());
        let pass = match q.as_str() {
            "nu" => (fitted - (2.0 - beta).min(1.0)).abs() <= 0.1,
            "gamma" | "rho1" => raw <= 1.0,
            "gamma_prime" | "rho2" => raw <= 2.0,
            other => panic!("unexpected quantity {other}"),
        };
        ok &= pass;
        if q == "nu" || !pass {
            detail.push(format!("beta={beta} {q}={fitted:.3}"));
        }
    }
    verdict(5, "hypothesis exponents", ok && rows.rows.len() == 15, &detail.join(", "), start);
}

#[test]
fn criterion_06_support_probe_trend() {
    let start = Instant::now();
    let r = run(Experiment::SupportProbe);
    let medians: Vec<f64> = (2..=5).map(|n| aggregate(&r, &format!("median_distance_n{n}"))).collect();
    let exceed: Vec<f64> = (2..=5).map(|n| aggregate(&r, &format!("exceedance_n{n}"))).collect();
    let strictly = medians.windows(2).all(|w| w[1] < w[0]);
    let nonincreasing = exceed.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        6,
        "support-probe trend",
        strictly && nonincreasing,
        &format!(
            "medians {:?} strictly decreasing {strictly}; exceedance at lambda {:.4}: {exceed:?} nonincreasing {nonincreasing}",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>(),
            aggregate(&r, "lambda")
        ),
        start,
    );
}

#[test]
fn criterion_07_scheme_equivalence() {
    let start = Instant::now();
    let r = run(Experiment::PicardCheck);
    let dist = r.replica_table.numbers("sup_distance").unwrap();
    let worst = dist.iter().map(|d| d.unwrap()).fold(0.0, f64::max);
    verdict(
        7,
        "Picard vs explicit",
        dist.len() == 5 && worst <= 1e-8,
        &format!("{} randomized equations, largest sup distance {worst:e}", dist.len()),
        start,
    );
}

#[test]
fn criterion_08_deterministic_physics() {
    let start = Instant::now();
    // Kirchhoff term of v₀ = |x|², ṽ₀ = 0 with a degree-7 product rule
    let q = sphere_nodes(SphereRule::Product { polar: 4, azimuth: 8 }).unwrap();
    let data = InitialData::from_profiles(ScalarProfile::Quadratic { scale: 1.0 }, ScalarProfile::Zero);
    let mut kirchhoff_err = 0.0f64;
    for (t, x) in [(0.25, [0.1, -0.4, 0.3]), (0.5, [0.0; 3]), (1.0, [1.0, 2.0, -0.5]), (3.0, [0.2, 0.2, 0.2])] {
        let exact = x.iter().map(|v| v * v).sum::<f64>() + 3.0 * t * t;
        kirchhoff_err = kirchhoff_err.max((kirchhoff_ic(&data, t, x, &q).unwrap() - exact).abs());
    }

    // finite propagation speed: a bump of radius 0.3 cannot reach |x| > 0.3 + t
    let grid = NoiseGrid::new(1.0, 64, Lattice::cube([0.0; 3], 1.5, 5).unwrap()).unwrap();
    let spec = CovarianceSpec::riesz(1.0, 1e-3, 1.0).unwrap();
    let sampler = NoiseSampler::new(&spec, &grid, 0, DiagonalRule::Matched).unwrap();
    let path = sampler.sample(11);
    let bump = ScalarProfile::CompactBump { amplitude: 1.0, radius: 0.3 };
    let ic = InitialData::from_profiles(bump, bump);
    let far = [[0.9, 0.0, 0.0], [0.0, 0.0, -1.1], [0.6, 0.6, 0.0]];
    let cfg = SolverConfig {
        eval_points: far.to_vec(),
        t0: 0.0,
        ..Default::default()
    };
    let x = solve_mild(&EquationSpec::new(Variant::Base), &path, None, None, &ic, &cfg).unwrap();
    let mut causal = true;
    for (row, &t) in x.times.iter().enumerate() {
        for (j, p) in far.iter().enumerate() {
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 0.3 + t + 1e-9 {
                causal &= x.value(row, j) == 0.0;
            }
        }
    }

    // constant drift c: X(t) = c t²/2
    let c = 1.7;
    let eq = EquationSpec::new(Variant::Base).with(
        Coefficient::zero(),
        Coefficient::zero(),
        Coefficient::zero(),
        Coefficient::constant(c),
    );
    let cfg = SolverConfig {
        eval_points: vec![[0.0; 3], [0.4, -0.2, 0.1]],
        t0: 0.25,
        ..Default::default()
    };
    let x = solve_mild(&eq, &path, None, None, &InitialData::zero(), &cfg).unwrap();
    // the left-point sum gives c t²/2 · (1 + 1/k) after k steps; judged at T
    let last = x.num_times() - 1;
    let t = x.times[last];
    let drift_rel = (0..x.num_points())
        .map(|j| (x.value(last, j) - c * t * t / 2.0).abs() / (c * t * t / 2.0))
        .fold(0.0, f64::max);
    verdict(
        8,
        "deterministic physics",
        kirchhoff_err <= 1e-12 && causal && drift_rel <= 0.03,
        &format!("Kirchhoff error {kirchhoff_err:e}; finite speed {causal}; drift relative error {drift_rel:.4}"),
        start,
    );
}

#[test]
fn criterion_09_girsanov_consistency() {
    let start = Instant::now();
    let grid = NoiseGrid::new(1.0, 32, Lattice::cube([0.0; 3], 1.5, 7).unwrap()).unwrap();
    let spec = CovarianceSpec::riesz(1.0, 1e-3, 1.0).unwrap();
    let sampler = NoiseSampler::new(&spec, &grid, 4, DiagonalRule::Matched).unwrap();
    let sigma = Coefficient::Sine { offset: 1.0, amplitude: 0.5, frequency: 1.0 };
    let drift = Coefficient::Affine { slope: 0.3, intercept: 0.1 };
    let eq = EquationSpec::new(Variant::Shifted).with(sigma, Coefficient::zero(), Coefficient::zero(), drift);
    let cfg = SolverConfig {
        sphere: SphereRule::Fibonacci(128),
        t0: 0.25,
        ..SolverConfig::at_points(stochwave::noise::Region::cube([0.0; 3], 0.5).grid(3))
    };
    let h = ControlH::constant(1.0, 32, 4, 0, 1.5)
        .add(&ControlH::constant(1.0, 32, 4, 2, -0.75))
        .unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let path = sampler.sample(seed);
        for n in [2u32, 3] {
            let shifted = solve_shifted(&eq, &path, &h, n, &InitialData::zero(), &cfg).unwrap();
            let moved = girsanov_shift(&path, &h, n).unwrap();
            let base = solve_mild(&eq.with_variant(Variant::Base), &moved, None, None, &InitialData::zero(), &cfg).unwrap();
            worst = worst.max(shifted.sup_distance(&base).unwrap() / base.sup_norm());
        }
    }
    verdict(
        9,
        "Girsanov consistency",
        worst <= 0.05,
        &format!("largest relative sup distance {worst:.2e} over 10 coupled runs"),
        start,
    );
}

#[derive(Default)]
struct Reads(Vec<(usize, usize)>);

impl AccessObserver for Reads {
    fn read(&mut self, target: usize, source: usize) {
        self.0.push((target, source));
    }
}

#[test]
fn criterion_10_invariant_suites() {
    let start = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // determinism: identical CSV bytes across repeats, worker counts and replay
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(Experiment::VarianceOracle);
    cfg.replicas = 1;
    let mut bytes = Vec::new();
    for (k, workers) in [1usize, 1, 0].into_iter().enumerate() {
        cfg.workers = workers;
        cfg.output_dir = dir.path().join(format!("run{k}"));
        harness::run_to_dir(&cfg).unwrap();
        bytes.push([REPLICAS_FILE, SUMMARY_FILE].map(|f| std::fs::read(cfg.output_dir.join(f)).unwrap()));
    }
    fail(bytes.windows(2).all(|w| w[0] == w[1]), "CSV bytes differ between runs");
    fail(harness::replay(&dir.path().join("run0")).unwrap().mismatched.is_empty(), "replay differs");

    // causality: no step reads an integrand from its own or a later step
    let grid = NoiseGrid::new(1.0, 16, Lattice::cube([0.0; 3], 1.0, 5).unwrap()).unwrap();
    let spec = CovarianceSpec::riesz(1.0, 1e-3, 1.0).unwrap();
    let sampler = NoiseSampler::new(&spec, &grid, 4, DiagonalRule::Matched).unwrap();
    let path = sampler.sample(3);
    let sine = Coefficient::Sine { offset: 0.5, amplitude: 0.5, frequency: 1.0 };
    let eq = EquationSpec::new(Variant::Full).with(sine, sine, Coefficient::constant(0.3), sine);
    let w = build_smoothed(&path, 2).unwrap();
    let h = ControlH::constant(1.0, 16, 4, 1, 0.5);
    let cfg = SolverConfig {
        sphere: SphereRule::Fibonacci(64),
        ..SolverConfig::at_points(vec![[0.0; 3], [0.25, 0.0, -0.25]])
    };
    let mut reads = Reads::default();
    solve_mild_observed(&eq, &path, Some(&w), Some(&h), &InitialData::zero(), &cfg, Some(&mut reads)).unwrap();
    fail(!reads.0.is_empty() && reads.0.iter().all(|&(k, m)| m < k), "acausal read");

    // norm axioms on solver output
    let fields: Vec<FieldSample> = (0..3)
        .map(|s| solve_mild(&eq, &sampler.sample(s), Some(&build_smoothed(&sampler.sample(s), 2).unwrap()), Some(&h), &InitialData::zero(), &cfg).unwrap())
        .collect();
    for rho in [0.1, 0.25, 0.7] {
        let d = |a: usize, b: usize| holder_distance(&fields[a], &fields[b], rho, 0.25).unwrap();
        fail(d(0, 0) == 0.0, "distance to self");
        fail(d(0, 1) == d(1, 0), "symmetry");
        fail(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12, "triangle inequality");
        let n = holder_norm(&fields[0], rho, 0.25).unwrap();
        let mut scaled = fields[0].clone();
        scaled.values.iter_mut().for_each(|v| *v *= -2.5);
        let ns = holder_norm(&scaled, rho, 0.25).unwrap();
        fail((ns.norm - 2.5 * n.norm).abs() <= 1e-12 * n.norm, "homogeneity");
    }

    // eigenbasis orthonormality and positive, descending eigenvalues
    let basis = sampler.basis().unwrap();
    for i in 0..basis.num_modes() {
        for j in 0..basis.num_modes() {
            let dot: f64 = basis.vector(i).iter().zip(basis.vector(j)).map(|(a, b)| a * b).sum();
            fail((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10, "orthonormality");
        }
    }
    fail(basis.eigenvalues.windows(2).all(|w| w[0] >= w[1]) && basis.eigenvalues.iter().all(|&l| l > 0.0), "eigenvalues");

    // sphere moments: the product rule is exact to its degree, Fibonacci to odd order
    let product = sphere_nodes(SphereRule::Product { polar: 6, azimuth: 12 }).unwrap();
    for (a, b, c) in [(0, 0, 0), (2, 0, 0), (0, 2, 2), (4, 0, 0), (2, 2, 2), (0, 0, 6), (1, 1, 0), (3, 0, 1)] {
        let exact = sphere_monomial(a, b, c);
        let got = product.integrate(|x| x[0].powi(a) * x[1].powi(b) * x[2].powi(c));
        fail((got - exact).abs() < 1e-12, "product-rule moment");
    }
    for rule in [SphereRule::Fibonacci(64), SphereRule::Fibonacci(256)] {
        let q = sphere_nodes(rule).unwrap();
        fail((q.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12, "sphere area");
        for (a, b, c) in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (3, 0, 0), (1, 1, 1), (2, 0, 1)] {
            fail(q.integrate(|x| x[0].powi(a) * x[1].powi(b) * x[2].powi(c)).abs() < 1e-12, "odd moment");
        }
    }

    verdict(
        10,
        "invariant suites",
        failures.is_empty(),
        &if failures.is_empty() { "all invariants hold".to_string() } else { format!("failures: {failures:?}") },
        start,
    );
}

/// `∫_{S²} x^a y^b z^c dσ` in closed form: zero unless all exponents are
/// even, otherwise `2 Γ(α)Γ(β)Γ(γ)/Γ(α+β+γ)` with `α = (a+1)/2` etc.
fn sphere_monomial(a: i32, b: i32, c: i32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    use statrs::function::gamma::gamma;
    let (x, y, z) = ((a as f64 + 1.0) / 2.0, (b as f64 + 1.0) / 2.0, (c as f64 + 1.0) / 2.0);
    2.0 * gamma(x) * gamma(y) * gamma(z) / gamma(x + y + z)
}
