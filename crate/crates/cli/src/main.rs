use std::path::PathBuf;
use std::process::ExitCode;

use asyncgl_cli::certify::{certify, write_certificate, CertifyOptions};
use asyncgl_cli::config::PhysicsName;
use asyncgl_cli::run::write_artifacts;
use asyncgl_cli::{load_config, run_scenario, run_suite, CliError, RunSummary, SuiteName, SuiteOptions};
use clap::{Parser, Subcommand};

/// Global/Local coupling solvers: single runs, comparison suites and
/// relaxation certificates.
#[derive(Parser)]
#[command(name = "asyncgl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Solve {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a comparison suite: paper-2d, weak-scaling or imbalance.
    Suite {
        name: String,
        /// Cube sizes of the weak-scaling suite.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Physics of the 3D suites.
        #[arg(long, default_value = "thermal", value_parser = ["thermal", "elasticity"])]
        physics: String,
        /// Refinement seed of the imbalance suite.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write zeros in every wall-clock column.
        #[arg(long)]
        no_wall_time: bool,
    },
    /// Check the companion spectral radius over random delay partitions.
    Certify {
        config: PathBuf,
        #[arg(long)]
        omega: Option<f64>,
        /// Delay bound; defaults to `solver.max_delay`.
        #[arg(long = "D")]
        max_delay: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_summary(s: &RunSummary) {
    println!(
        "{:<28} {:<16} iterations {:>6}  loc. solves [{}, {}]  rel. residual {:.3e}  error {:.3e}  {:.3} s  {}",
        s.case,
        s.variant,
        s.iterations,
        s.loc_solves_min,
        s.loc_solves_max,
        s.rel_residual,
        s.err_vs_oracle,
        s.wall_seconds,
        if s.converged { "converged" } else { "NOT CONVERGED" }
    );
}

fn execute(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Solve { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let outcome = run_scenario(&cfg)?;
            write_artifacts(&outcome, &dir)?;
            print_summary(&outcome.summary);
            if let Some(e) = &outcome.error {
                eprintln!("solver: {e}");
            }
            Ok(outcome.summary.converged)
        }
        Command::Suite {
            name,
            sizes,
            out,
            physics,
            seed,
            no_wall_time,
        } => {
            let opts = SuiteOptions {
                sizes,
                out,
                physics: if physics == "elasticity" {
                    PhysicsName::Elasticity
                } else {
                    PhysicsName::Thermal
                },
                seed,
                wall_time: !no_wall_time,
            };
            let summaries = run_suite(name.parse::<SuiteName>()?, &opts)?;
            summaries.iter().for_each(print_summary);
            println!("wrote {}", opts.out.join("summary.csv").display());
            Ok(summaries.iter().all(|s| s.converged))
        }
        Command::Certify {
            config,
            omega,
            max_delay,
            trials,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let cert = certify(
                &cfg,
                &CertifyOptions {
                    omega,
                    max_delay,
                    trials,
                    seed,
                },
            )?;
            write_certificate(&cert, &dir)?;
            let b = &cert.bounds;
            println!("alpha in [{:.6e}, {:.6e}], omega_sync {:.6e}", b.alpha_min, b.alpha_max, b.omega_sync);
            if let Some(f) = b.omega_async_factor {
                println!("certified factor for D = {}: {:.6e}", b.max_delay, f);
            }
            let passed = cert.report.passed();
            println!(
                "omega {:.6e}, D {}, {} trials: max rho {:.8}  {}",
                cert.omega,
                b.max_delay,
                cert.report.trials.len(),
                cert.report.max_rho(),
                if passed { "PASS" } else { "FAIL" }
            );
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
