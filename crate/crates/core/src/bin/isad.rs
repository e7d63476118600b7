use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use isad::driver::config::{load_config, ExperimentConfig};
use isad::driver::{run, write_trace};
use isad::problems::ProblemKind;
use isad::sampling::SamplingRegime;
use isad::verify::{bias_identity_check, concentration_experiment, eig_sandwich_experiment};
use isad::{IsadError, Result};

#[derive(Parser)]
#[command(name = "isad", version, about = "Sampled-operator ADMM with adaptive penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem and write the per-round trace as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out` from the config; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled problems.
    Problems {
        #[command(subcommand)]
        action: ProblemsAction,
    },
    /// Monte-Carlo checks on the configured distribution.
    Verify {
        #[arg(value_enum)]
        check: Check,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ProblemsAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Concentration,
    Sandwich,
    Bias,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_command(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let config = load(config, seed)?;
    let (run_config, instance) = config.build()?;
    let outcome = run(&run_config, &instance.dist, &instance.model)?;
    match out.or(config.out) {
        Some(path) => write_trace(create(&path)?, &outcome.trace)?,
        None => write_trace(io::stdout().lock(), &outcome.trace)?,
    }
    let x = &outcome.state.x;
    eprintln!(
        "{}: {} rounds, converged {}, beta {}, objective {:.10e}, reference error {:.3e}",
        instance.kind,
        outcome.trace.len(),
        outcome.converged,
        outcome.state.beta,
        instance.objective(x),
        instance.reference_error(x),
    );
    Ok(())
}

fn verify_command(check: Check, config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let config = load(config, seed)?;
    let (run_config, instance) = config.build()?;
    let v = &config.verify;
    let seed = run_config.seed;
    let dist = &instance.dist;
    let regime = SamplingRegime::with_scale(config.regime_epsilon, dist.subgaussian(), config.theta_scale)?;
    match check {
        Check::Concentration => {
            let report = concentration_experiment(dist, &regime, v.t_max, v.trials, seed)?;
            report.write_csv(create(out)?)?;
            eprintln!(
                "q_1 {:.3}, q_{} {:.3}, nonincreasing from t=5: {}, first q_t < 0.05 at {:?}",
                report.q[0],
                v.t_max,
                report.q[v.t_max - 1],
                report.nonincreasing_from(5),
                report.first_below(0.05)
            );
        }
        Check::Sandwich => {
            let report = eig_sandwich_experiment(dist, &regime, v.eps_prime, v.t_max, v.trials, seed)?;
            report.write_csv(create(out)?)?;
            eprintln!(
                "sigma {:.6e}, stable fraction {:.3}, median K {}",
                report.sigma,
                report.fraction_stable(),
                report.median_k()
            );
        }
        Check::Bias => {
            let n = instance.model.dim();
            let x = run_config.x0.clone().unwrap_or_else(|| DVector::from_element(n, 1.0));
            let y = instance.model.p().feasible_point();
            let z = run_config.z0.clone().unwrap_or_else(|| DVector::zeros(n));
            let report = bias_identity_check(&x, &y, &z, v.beta, dist, &instance.model, v.samples, v.trials, seed)?;
            report.write_csv(create(out)?)?;
            eprintln!(
                "gap {:.6e} ± {:.2e}, exact {:.6e}, |z| {:.2}",
                report.gap_mean,
                report.gap_se,
                report.penalty_exact,
                report.z_score()
            );
        }
    }
    Ok(())
}

fn list_problems() -> Result<()> {
    let mut out = io::stdout().lock();
    for kind in ProblemKind::ALL {
        writeln!(out, "{:<10} {}", kind.name(), kind.summary())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run_command(&config, seed, out),
        Command::Problems {
            action: ProblemsAction::List,
        } => list_problems(),
        Command::Verify {
            check,
            config,
            out,
            seed,
        } => verify_command(check, &config, &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                IsadError::Config(_) | IsadError::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
