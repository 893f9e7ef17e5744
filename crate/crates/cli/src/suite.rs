//! Comparison suites over generated scenarios.

use std::path::{Path, PathBuf};

use asyncgl_core::monolithic_reference;
use serde::{Deserialize, Serialize};

use crate::config::{
    Geometry, OutputConfig, PhysicsName, ProblemConfig, ScenarioConfig, ScheduleName, SolverConfig, Variant,
    MAX_CUBE_N,
};
use crate::error::CliError;
use crate::run::{build_scenario, run_on, write_artifacts, write_rows, RunSummary};

/// Delay bound of the asynchronous runs in every suite.
pub const SUITE_MAX_DELAY: usize = 2;
/// Divisor giving inclusions 1000 times stiffer in the balanced reference of
/// the imbalance suite.
const STIFF_CONTRAST: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Paper2d,
    WeakScaling,
    Imbalance,
}

impl std::str::FromStr for SuiteName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "paper-2d" => Ok(SuiteName::Paper2d),
            "weak-scaling" => Ok(SuiteName::WeakScaling),
            "imbalance" => Ok(SuiteName::Imbalance),
            _ => Err(CliError::InvalidArgument(format!(
                "unknown suite {s:?} (expected paper-2d, weak-scaling or imbalance)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Cube sizes `n` of the weak-scaling suite; empty selects `[2, 3]`.
    pub sizes: Vec<usize>,
    pub out: PathBuf,
    /// Physics of the 3D suites.
    pub physics: PhysicsName,
    /// Refinement seed of the imbalance suite.
    pub seed: u64,
    pub wall_time: bool,
}

impl SuiteOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        SuiteOptions {
            sizes: Vec::new(),
            out: out.into(),
            physics: PhysicsName::Thermal,
            seed: 0,
            wall_time: true,
        }
    }
}

/// One row of `comparison.csv`: global iteration counts per variant (empty
/// when not run) and the asynchronous per-patch solve range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: String,
    pub sync_fixed: Option<usize>,
    pub sync_aitken: Option<usize>,
    pub async_sim: Option<usize>,
    pub async_concurrent: Option<usize>,
    pub async_loc_solves_min: Option<usize>,
    pub async_loc_solves_max: Option<usize>,
}

fn plan(name: SuiteName, opts: &SuiteOptions) -> Result<Vec<(ProblemConfig, Vec<SolverConfig>)>, CliError> {
    let async_solver = |variant, schedule| SolverConfig {
        max_delay: SUITE_MAX_DELAY,
        schedule,
        ..SolverConfig::new(variant)
    };
    match name {
        SuiteName::Paper2d => {
            if !opts.sizes.is_empty() {
                return Err(CliError::InvalidArgument("paper-2d takes no sizes".into()));
            }
            let solvers: Vec<SolverConfig> = Variant::ALL
                .iter()
                .map(|&v| async_solver(v, ScheduleName::Random))
                .collect();
            Ok([PhysicsName::Thermal, PhysicsName::Elasticity]
                .into_iter()
                .map(|p| (ProblemConfig::new(p, Geometry::TwoPatch2d), solvers.clone()))
                .collect())
        }
        SuiteName::WeakScaling => {
            let sizes = if opts.sizes.is_empty() { vec![2, 3] } else { opts.sizes.clone() };
            if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n > MAX_CUBE_N) {
                return Err(CliError::InvalidArgument(format!(
                    "weak-scaling size {n} outside 1..={MAX_CUBE_N}"
                )));
            }
            let solvers = vec![
                SolverConfig::new(Variant::SyncAitken),
                async_solver(Variant::AsyncSim, ScheduleName::Random),
            ];
            Ok(sizes
                .into_iter()
                .map(|n| {
                    let problem = ProblemConfig {
                        n: Some(n),
                        ..ProblemConfig::new(opts.physics, Geometry::CubeGrid3d)
                    };
                    (problem, solvers.clone())
                })
                .collect())
        }
        SuiteName::Imbalance => {
            if !opts.sizes.is_empty() {
                return Err(CliError::InvalidArgument("imbalance takes no sizes (use --seed)".into()));
            }
            let solvers = vec![
                SolverConfig::new(Variant::SyncAitken),
                async_solver(Variant::AsyncSim, ScheduleName::VirtualTime),
            ];
            let balanced = ProblemConfig {
                n: Some(2),
                contrast: Some(STIFF_CONTRAST),
                ..ProblemConfig::new(opts.physics, Geometry::CubeGrid3d)
            };
            let imbalanced = ProblemConfig {
                seed: Some(opts.seed),
                ..ProblemConfig::new(opts.physics, Geometry::ImbalancedGrid)
            };
            Ok(vec![(balanced, solvers.clone()), (imbalanced, solvers)])
        }
    }
}

/// Runs every (case, variant) pair, writing per-run artifacts under
/// `out/<case>/<variant>/`, then `out/summary.csv` and `out/comparison.csv`.
pub fn run_suite(name: SuiteName, opts: &SuiteOptions) -> Result<Vec<RunSummary>, CliError> {
    let plan = plan(name, opts)?;
    let output = OutputConfig {
        dir: opts.out.clone(),
        wall_time: opts.wall_time,
    };
    let mut summaries = Vec::new();
    for (problem, solvers) in plan {
        let scenario = build_scenario(&problem)?;
        let reference = monolithic_reference(&scenario)?;
        let case = problem.case_name();
        for solver in solvers {
            let cfg = ScenarioConfig {
                problem: problem.clone(),
                solver,
                output: output.clone(),
            };
            cfg.validate()?;
            let outcome = run_on(&scenario, &reference.u_gamma, &cfg, &case)?;
            write_artifacts(&outcome, &run_dir(&opts.out, &case, cfg.solver.variant))?;
            summaries.push(outcome.summary);
        }
    }
    write_rows(&opts.out.join("summary.csv"), &summaries)?;
    write_rows(&opts.out.join("comparison.csv"), &comparison(&summaries))?;
    Ok(summaries)
}

pub fn comparison(summaries: &[RunSummary]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for s in summaries {
        let idx = match rows.iter().position(|r| r.case == s.case) {
            Some(i) => i,
            None => {
                rows.push(ComparisonRow {
                    case: s.case.clone(),
                    sync_fixed: None,
                    sync_aitken: None,
                    async_sim: None,
                    async_concurrent: None,
                    async_loc_solves_min: None,
                    async_loc_solves_max: None,
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[idx];
        let iters = s.converged.then_some(s.iterations);
        match s.variant.as_str() {
            "sync-fixed" => row.sync_fixed = iters,
            "sync-aitken" => row.sync_aitken = iters,
            "async-sim" => {
                row.async_sim = iters;
                row.async_loc_solves_min = Some(s.loc_solves_min);
                row.async_loc_solves_max = Some(s.loc_solves_max);
            }
            "async-concurrent" => row.async_concurrent = iters,
            _ => {}
        }
    }
    rows
}

/// Output directory of one run inside a suite directory.
pub fn run_dir(out: &Path, case: &str, variant: Variant) -> PathBuf {
    out.join(case).join(variant.name())
}
