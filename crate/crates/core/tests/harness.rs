use std::fs;
use std::path::Path;
use std::process::Command;

use stochwave::harness::{
    self, emit_all, median, Experiment, ExperimentConfig, RunRecord, RECORD_FILE, REPLICAS_FILE, SUMMARY_FILE,
};
use stochwave::solver::Coefficient;

fn small(experiment: Experiment) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(experiment);
    c.replicas = 4;
    c.grid.num_steps = 32;
    c.grid.lattice_points = 5;
    c.region.points = 3;
    c.solver.sphere = "fib:64".parse().unwrap();
    c
}

fn header(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn single_replica_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(Experiment::VarianceOracle);
    c.replicas = 1;
    let mut out = Vec::new();
    for k in 0..2 {
        c.output_dir = dir.path().join(k.to_string());
        harness::run_to_dir(&c).unwrap();
        out.push(fs::read(c.output_dir.join(REPLICAS_FILE)).unwrap());
        out.push(fs::read(c.output_dir.join(SUMMARY_FILE)).unwrap());
    }
    assert_eq!(out[0], out[2]);
    assert_eq!(out[1], out[3]);
}

#[test]
fn documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(Experiment, &str, &str); 7] = [
        (
            Experiment::VarianceOracle,
            "replica,seed,x_t0.5,x_t1",
            "time,replicas,variance,ci_low,ci_high,oracle,relative_error",
        ),
        (
            Experiment::IncrementExponent,
            "replica,seed,x_center_final,sup_abs",
            "direction,moment,separation,mean_abs_increment_pow",
        ),
        (
            Experiment::WongzakaiGrowth,
            "replica,seed,norm_n2,norm_n3,norm_n4,norm_n5,localized_norm_n2,localized_norm_n3,localized_norm_n4,localized_norm_n5",
            "level,l2_norm,ci_low,ci_high,rate,ratio,localized_l2_norm,localized_envelope,localized_ratio",
        ),
        (
            Experiment::LocalizationProb,
            "replica,seed,in_l_n2,in_l_n3,in_l_n4",
            "level,empirical,wilson_low,wilson_high,closed_form,within",
        ),
        (
            Experiment::SupportProbe,
            "replica,seed,distance_n2,distance_n3",
            "level,median_distance,median_ci_low,median_ci_high,lambda,exceedance,wilson_low,wilson_high",
        ),
        (
            Experiment::Hypotheses,
            "replica,seed",
            "beta,quantity,exponent,raw_slope,r_squared,cap,expected,passed",
        ),
        (
            Experiment::PicardCheck,
            "replica,seed,equation,sup_distance,iterations,final_delta",
            "statistic,value",
        ),
    ];
    for (e, replicas, summary) in cases {
        let mut c = small(e);
        c.betas = vec![1.0];
        c.n_levels = match e {
            Experiment::WongzakaiGrowth => vec![2, 3, 4, 5],
            Experiment::LocalizationProb => vec![2, 3, 4],
            Experiment::SupportProbe => vec![2, 3],
            Experiment::PicardCheck => vec![2],
            _ => vec![],
        };
        if e == Experiment::IncrementExponent {
            c.replicas = 2;
        }
        c.output_dir = dir.path().join(e.name());
        harness::run_to_dir(&c).unwrap();
        assert_eq!(header(&c.output_dir, REPLICAS_FILE), replicas, "{e}");
        assert_eq!(header(&c.output_dir, SUMMARY_FILE), summary, "{e}");
        let record = RunRecord::from_json(&fs::read_to_string(c.output_dir.join(RECORD_FILE)).unwrap()).unwrap();
        assert!(record.is_consistent());
        assert_eq!(record.config, c);
    }
}

#[test]
fn support_probe_has_one_row_per_level() {
    let mut c = small(Experiment::SupportProbe);
    c.n_levels = vec![2, 3, 4, 5];
    let r = harness::run(&c).unwrap();
    assert_eq!(r.summary_table.rows.len(), 4);
    let levels = r.summary_table.numbers("level").unwrap();
    assert_eq!(levels, vec![Some(2.0), Some(3.0), Some(4.0), Some(5.0)]);
    // the median column is the median of the per-replica distances
    let per_replica: Vec<f64> = r.replica_table.numbers("distance_n3").unwrap().into_iter().map(Option::unwrap).collect();
    assert_eq!(r.summary_table.numbers("median_distance").unwrap()[1], Some(median(&per_replica)));
    // λ defaults to the first level's median, so exactly half or fewer exceed it there
    let first = r.aggregate("exceedance_n2").unwrap().value.unwrap();
    assert!(first <= 0.5);
}

#[test]
fn localization_matches_closed_form_at_level_three() {
    let mut c = ExperimentConfig::preset(Experiment::LocalizationProb);
    c.n_levels = vec![3];
    let r = harness::run(&c).unwrap();
    assert!(r.check("closed_form_in_wilson_n3").unwrap().passed);
}

#[test]
fn aggregates_ignore_replica_order() {
    let c = ExperimentConfig::preset(Experiment::WongzakaiGrowth);
    let r = harness::run(&c).unwrap();
    let col: Vec<f64> = r.replica_table.numbers("norm_n4").unwrap().into_iter().map(Option::unwrap).collect();
    let mut reversed = col.clone();
    reversed.reverse();
    let l2 = |xs: &[f64]| (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
    assert!((l2(&col) - l2(&reversed)).abs() <= 1e-12 * l2(&col));
    assert!((r.aggregate("l2_norm_n4").unwrap().value.unwrap() - l2(&col)).abs() <= 1e-12 * l2(&col));
    assert_eq!(median(&col), median(&reversed));
}

#[test]
fn worker_count_does_not_change_results() {
    let mut c = small(Experiment::PicardCheck);
    c.workers = 1;
    let a = harness::run(&c).unwrap();
    c.workers = 3;
    let b = harness::run(&c).unwrap();
    assert_eq!(a.replica_table, b.replica_table);
    assert_eq!(a.summary_table, b.summary_table);
}

#[test]
fn all_blown_up_run_still_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Experiment::VarianceOracle);
    c.equation.noise_coef = Coefficient::Affine {
        slope: 1e300,
        intercept: 1e300,
    };
    c.output_dir = dir.path().to_path_buf();
    let r = harness::run(&c).unwrap();
    assert_eq!(r.excluded, c.replicas);
    assert!(r.mostly_blown_up() && r.is_consistent());
    emit_all(&r, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join(REPLICAS_FILE)).unwrap().lines().count(), 1);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stochwave")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("loc");
    let out = cli(&["localization-prob", "--replicas", "50", "--output-dir", run_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.toml", REPLICAS_FILE, SUMMARY_FILE, RECORD_FILE] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let out = cli(&["validate-config", run_dir.join("config.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = cli(&["replay", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("replay matches"));

    // a tampered CSV no longer matches
    let csv = run_dir.join(SUMMARY_FILE);
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push('\n');
    fs::write(&csv, text).unwrap();
    assert_eq!(cli(&["replay", run_dir.to_str().unwrap()]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "experiment = \"localization-prob\"\nreplicas = 0\nalpha = 0.5\nsurprise = 1\n").unwrap();
    let out = cli(&["validate-config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["localization-prob", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["localization-prob", "--replicas", "0", "--output-dir", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"));

    let blow = dir.path().join("blow.toml");
    fs::write(
        &blow,
        "experiment = \"variance-oracle\"\nreplicas = 3\n[grid]\nnum_steps = 8\nlattice_points = 5\n\
         [equation]\nnoise_coef = { kind = \"affine\", slope = 1e300, intercept = 1e300 }\n",
    )
    .unwrap();
    let out = cli(&["variance-oracle", "--config", blow.to_str().unwrap(), "--output-dir", dir.path().join("blow").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
