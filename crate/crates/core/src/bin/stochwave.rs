use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stochwave::harness::{self, Experiment, ExperimentConfig, RunRecord};
use stochwave::Error;

#[derive(Parser)]
#[command(name = "stochwave", version, about = "Monte Carlo experiments for the 3D stochastic wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble variance of X(t, 0) against the spectral closed form.
    VarianceOracle(RunArgs),
    /// Spatial and temporal increment exponents.
    IncrementExponent(RunArgs),
    /// Growth of the smoothed noise norm across dyadic levels.
    WongzakaiGrowth(RunArgs),
    /// Localization probabilities against their closed form.
    LocalizationProb(RunArgs),
    /// Hölder distance between smoothed-noise solutions and the solution.
    SupportProbe(RunArgs),
    /// Kernel regularity exponents from quadrature.
    Hypotheses(RunArgs),
    /// Picard iteration against the explicit recursion.
    PicardCheck(RunArgs),
    /// Parse and validate a configuration file.
    ValidateConfig { path: PathBuf },
    /// Re-run a stored run and compare its CSV output byte for byte.
    Replay { run_dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overriding the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

fn build_config(experiment: Experiment, args: RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
            ExperimentConfig::from_toml_for(experiment, &text)?
        }
        None => ExperimentConfig::preset(experiment),
    };
    if let Some(d) = args.output_dir {
        config.output_dir = d;
    }
    if let Some(r) = args.replicas {
        config.replicas = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn summarize(record: &RunRecord) {
    println!(
        "{}: {} replicas, {} excluded, {:.1} s",
        record.experiment,
        record.replicas,
        record.excluded,
        record.wall_time_secs
    );
    for a in &record.aggregates {
        match (a.value, a.interval) {
            (Some(v), Some(ci)) => println!("  {:<32} {v:.6}  [{:.6}, {:.6}]", a.name, ci.low, ci.high),
            (Some(v), None) => println!("  {:<32} {v:.6}", a.name),
            (None, _) => println!("  {:<32} n/a", a.name),
        }
    }
    for c in &record.checks {
        println!("  [{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
    }
}

fn exit_code(err: &Error) -> ExitCode {
    ExitCode::from(match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    })
}

fn finish(record: &RunRecord) -> ExitCode {
    summarize(record);
    if record.mostly_blown_up() {
        eprintln!("error: {} of {} replicas blew up", record.excluded, record.replicas);
        return ExitCode::from(EXIT_BLOWUP);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = match &cli.command {
        Command::VarianceOracle(_) => Some(Experiment::VarianceOracle),
        Command::IncrementExponent(_) => Some(Experiment::IncrementExponent),
        Command::WongzakaiGrowth(_) => Some(Experiment::WongzakaiGrowth),
        Command::LocalizationProb(_) => Some(Experiment::LocalizationProb),
        Command::SupportProbe(_) => Some(Experiment::SupportProbe),
        Command::Hypotheses(_) => Some(Experiment::Hypotheses),
        Command::PicardCheck(_) => Some(Experiment::PicardCheck),
        _ => None,
    };
    let result = match (cli.command, experiment) {
        (Command::ValidateConfig { path }, _) => ExperimentConfig::load(&path).map(|c| {
            println!("{}: valid {} configuration", path.display(), c.experiment);
            ExitCode::SUCCESS
        }),
        (Command::Replay { run_dir }, _) => harness::replay(&run_dir).map(|r| {
            let code = finish(&r.record);
            if r.mismatched.is_empty() {
                println!("replay matches {}", run_dir.display());
                code
            } else {
                eprintln!("replay differs in {}", r.mismatched.join(", "));
                ExitCode::from(EXIT_FAILURE)
            }
        }),
        (Command::VarianceOracle(a)
        | Command::IncrementExponent(a)
        | Command::WongzakaiGrowth(a)
        | Command::LocalizationProb(a)
        | Command::SupportProbe(a)
        | Command::Hypotheses(a)
        | Command::PicardCheck(a), Some(e)) => build_config(e, a).and_then(|c| {
            let record = harness::run_to_dir(&c)?;
            println!("wrote {}", c.output_dir.display());
            Ok(finish(&record))
        }),
        _ => unreachable!("every run subcommand names an experiment"),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
