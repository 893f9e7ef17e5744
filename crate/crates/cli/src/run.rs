//! Single scenario runs and their CSV artifacts.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use asyncgl_core::model_problems::{cube_grid_3d, imbalanced_grid, two_patch_2d_with, dof_costs, TwoPatchOptions};
use asyncgl_core::solvers::relative_error;
use asyncgl_core::{
    generalized_alphas, monolithic_reference, relaxation_bounds, richardson_sync, run_async_concurrent,
    run_async_simulated, AsyncTrace, ConcurrentOptions, CouplingError, CouplingScenario, DelaySchedule, Relaxation,
    SolveReport, StoppingCriteria,
};
use serde::{Deserialize, Serialize};

use crate::config::{Geometry, ProblemConfig, ScenarioConfig, ScheduleName, SolverConfig, Variant, DEFAULT_REFINEMENT};
use crate::error::CliError;

/// Cap on global plus fine free dofs of a scenario.
pub const MAX_TOTAL_DOFS: usize = 50_000;
/// Default asynchronous relaxation as a fraction of the certified bound.
pub const ASYNC_SAFETY: f64 = 0.9;

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: String,
    pub variant: String,
    /// Global iterations (updates before the last residual).
    pub iterations: usize,
    pub loc_solves_min: usize,
    pub loc_solves_max: usize,
    pub wall_seconds: f64,
    /// `‖r_last‖ / ‖r₀‖`.
    pub rel_residual: f64,
    /// `‖u_Γ − u*_Γ‖ / ‖u*_Γ‖` against the monolithic reference.
    pub err_vs_oracle: f64,
    pub converged: bool,
}

/// One row of `history.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub j: usize,
    pub residual_norm: f64,
    pub omega: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    /// Absent when the solver failed before producing iterates.
    pub report: Option<SolveReport>,
    pub trace: Option<AsyncTrace>,
    /// Solver error, if any.
    pub error: Option<String>,
}

pub fn build_scenario(problem: &ProblemConfig) -> Result<CouplingScenario, CliError> {
    let physics = problem.physics.physics();
    let scenario = match problem.geometry {
        Geometry::TwoPatch2d => two_patch_2d_with(
            physics,
            TwoPatchOptions {
                refinement: problem.refinement.unwrap_or(DEFAULT_REFINEMENT),
                contrast: problem.contrast,
                ..TwoPatchOptions::default()
            },
        )?,
        Geometry::CubeGrid3d => {
            let n = problem
                .n
                .ok_or_else(|| CliError::InvalidArgument("cube-grid-3d needs n".into()))?;
            cube_grid_3d(physics, n, problem.contrast)?
        }
        Geometry::ImbalancedGrid => imbalanced_grid(physics, problem.seed.unwrap_or(0))?,
    };
    let total = total_dofs(&scenario);
    if total > MAX_TOTAL_DOFS {
        return Err(CliError::InvalidArgument(format!(
            "{} has {total} dofs, above the cap of {MAX_TOTAL_DOFS}",
            problem.case_name()
        )));
    }
    Ok(scenario)
}

pub fn total_dofs(scenario: &CouplingScenario) -> usize {
    let (global, patches) = dof_costs(scenario);
    (global + patches.iter().sum::<f64>()) as usize
}

/// Relaxation used by `solver`: the configured value, 1 for synchronous
/// variants, `ASYNC_SAFETY` times the certified bound otherwise.
pub fn resolve_omega(scenario: &CouplingScenario, solver: &SolverConfig) -> Result<f64, CliError> {
    if let Some(w) = solver.omega {
        return Ok(w);
    }
    if !solver.variant.is_async() {
        return Ok(1.0);
    }
    let (lo, hi) = generalized_alphas(scenario)?;
    Ok(ASYNC_SAFETY * relaxation_bounds(lo, hi, solver.max_delay)?.safe_omega())
}

fn criteria(cfg: &ScenarioConfig) -> StoppingCriteria {
    StoppingCriteria {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        record_wall_time: cfg.output.wall_time,
        ..StoppingCriteria::default()
    }
}

fn solve(
    scenario: &CouplingScenario,
    cfg: &ScenarioConfig,
    omega: f64,
) -> asyncgl_core::Result<(SolveReport, Option<AsyncTrace>)> {
    let solver = &cfg.solver;
    let criteria = criteria(cfg);
    match solver.variant {
        Variant::SyncFixed => richardson_sync(scenario, Relaxation::Fixed(omega), criteria).map(|r| (r, None)),
        Variant::SyncAitken => {
            richardson_sync(scenario, Relaxation::Aitken { initial: omega }, criteria).map(|r| (r, None))
        }
        Variant::AsyncSim => {
            let schedule = match solver.schedule {
                ScheduleName::Random => DelaySchedule::random(solver.max_delay, solver.schedule_seed),
                ScheduleName::VirtualTime => {
                    let (global, patches) = dof_costs(scenario);
                    DelaySchedule::virtual_time(solver.max_delay, global, patches)
                }
            };
            run_async_simulated(scenario, omega, &schedule, criteria).map(|(r, t)| (r, Some(t)))
        }
        Variant::AsyncConcurrent => {
            let mut opts = ConcurrentOptions::new(omega, solver.ranks.unwrap_or(scenario.patch_count() + 1));
            opts.criteria = criteria;
            opts.max_delay = Some(solver.max_delay);
            run_async_concurrent(scenario, &opts).map(|(r, t)| (r, Some(t)))
        }
    }
}

/// Runs the configured variant on a prebuilt scenario and compares the
/// result with `reference` (the interface trace of the monolithic solve).
pub fn run_on(
    scenario: &CouplingScenario,
    reference: &nalgebra::DVector<f64>,
    cfg: &ScenarioConfig,
    case: &str,
) -> Result<RunOutcome, CliError> {
    let omega = resolve_omega(scenario, &cfg.solver)?;
    let (report, trace, error) = match solve(scenario, cfg, omega) {
        Ok((r, t)) => (Some(r), t, None),
        Err(CouplingError::Divergence { report }) => {
            let msg = CouplingError::Divergence { report: report.clone() }.to_string();
            (Some(*report), None, Some(msg))
        }
        Err(e @ (CouplingError::InvalidArgument(_) | CouplingError::Configuration(_))) => return Err(e.into()),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let summary = match &report {
        Some(r) => summarize(case, cfg.solver.variant, r, reference, error.is_none()),
        None => RunSummary {
            case: case.to_string(),
            variant: cfg.solver.variant.name().to_string(),
            iterations: 0,
            loc_solves_min: 0,
            loc_solves_max: 0,
            wall_seconds: 0.0,
            rel_residual: f64::NAN,
            err_vs_oracle: f64::NAN,
            converged: false,
        },
    };
    Ok(RunOutcome {
        summary,
        report,
        trace,
        error,
    })
}

/// Builds the scenario and the monolithic reference, then runs the variant.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let scenario = build_scenario(&cfg.problem)?;
    let reference = monolithic_reference(&scenario)?;
    run_on(&scenario, &reference.u_gamma, cfg, &cfg.problem.case_name())
}

pub fn summarize(
    case: &str,
    variant: Variant,
    report: &SolveReport,
    reference: &nalgebra::DVector<f64>,
    ok: bool,
) -> RunSummary {
    let (lo, hi) = report.patch_solve_range();
    RunSummary {
        case: case.to_string(),
        variant: variant.name().to_string(),
        iterations: report.iterations(),
        loc_solves_min: lo,
        loc_solves_max: hi,
        wall_seconds: report.history.last().map_or(0.0, |r| r.wall_time),
        rel_residual: report.relative_residual(),
        err_vs_oracle: relative_error(&report.final_u_gamma, reference),
        converged: ok && report.converged,
    }
}

pub fn history_rows(report: &SolveReport) -> Vec<HistoryRow> {
    report
        .history
        .iter()
        .map(|r| HistoryRow {
            j: r.j,
            residual_norm: r.residual_norm,
            omega: r.omega,
            wall_seconds: r.wall_time,
        })
        .collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

/// Writes `history.csv`, `trace.csv` (asynchronous variants) and a one-row
/// `summary.csv` into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some(report) = &outcome.report {
        write_rows(&dir.join("history.csv"), &history_rows(report))?;
    }
    if let Some(trace) = &outcome.trace {
        let path = dir.join("trace.csv");
        let mut file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        trace.write_csv(&mut file)?;
        file.flush().map_err(|e| CliError::io(&path, e))?;
    }
    write_rows(&dir.join("summary.csv"), std::slice::from_ref(&outcome.summary))
}
