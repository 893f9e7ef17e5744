use asyncgl_cli::config::{Geometry, PhysicsName, ProblemConfig, SolverConfig, Variant};
use asyncgl_cli::run::{build_scenario, history_rows, run_scenario};
use asyncgl_cli::ScenarioConfig;

fn config(physics: PhysicsName, geometry: Geometry, variant: Variant) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(ProblemConfig::new(physics, geometry), SolverConfig::new(variant));
    cfg.output.wall_time = false;
    cfg
}

#[test]
fn sync_fixed_matches_oracle() {
    let mut cfg = config(PhysicsName::Thermal, Geometry::TwoPatch2d, Variant::SyncFixed);
    cfg.solver.omega = Some(1.0);
    let out = run_scenario(&cfg).unwrap();
    assert!(out.summary.converged);
    assert!(out.summary.err_vs_oracle <= 1e-6, "{}", out.summary.err_vs_oracle);
    assert!(out.error.is_none());
}

#[test]
fn aitken_needs_no_more_iterations_than_fixed() {
    let fixed = run_scenario(&config(PhysicsName::Thermal, Geometry::TwoPatch2d, Variant::SyncFixed)).unwrap();
    let aitken = run_scenario(&config(PhysicsName::Thermal, Geometry::TwoPatch2d, Variant::SyncAitken)).unwrap();
    assert!(fixed.summary.converged && aitken.summary.converged);
    assert!(aitken.summary.iterations <= fixed.summary.iterations);
}

#[test]
fn cube_elasticity_async_reports_patch_solve_range() {
    let mut cfg = config(PhysicsName::Elasticity, Geometry::CubeGrid3d, Variant::AsyncSim);
    cfg.problem.n = Some(2);
    cfg.solver.max_delay = 2;
    let out = run_scenario(&cfg).unwrap();
    assert!(out.summary.converged);
    let report = out.report.as_ref().unwrap();
    assert_eq!(report.per_patch_solves.len(), 8);
    let (lo, hi) = report.patch_solve_range();
    assert_eq!((out.summary.loc_solves_min, out.summary.loc_solves_max), (lo, hi));
    assert!(lo >= 1 && lo <= hi);
    assert!(out.trace.is_some());
}

#[test]
fn cube_n2_has_eight_patches() {
    let mut problem = ProblemConfig::new(PhysicsName::Thermal, Geometry::CubeGrid3d);
    problem.n = Some(2);
    assert_eq!(build_scenario(&problem).unwrap().patch_count(), 8);
}

#[test]
fn summary_matches_report() {
    let out = run_scenario(&config(PhysicsName::Elasticity, Geometry::TwoPatch2d, Variant::SyncAitken)).unwrap();
    let report = out.report.unwrap();
    let s = &out.summary;
    assert_eq!(s.iterations, report.iterations());
    assert_eq!(s.rel_residual, report.relative_residual());
    assert_eq!(s.converged, report.converged);
    assert_eq!(s.wall_seconds, 0.0);
    let rows = history_rows(&report);
    assert_eq!(rows.len(), report.history.len());
    assert!(rows.iter().zip(&report.history).all(|(r, h)| r.residual_norm == h.residual_norm && r.omega == h.omega));
}

#[test]
fn divergence_is_recorded_not_raised() {
    let mut cfg = config(PhysicsName::Thermal, Geometry::TwoPatch2d, Variant::SyncFixed);
    cfg.solver.omega = Some(4.0);
    let out = run_scenario(&cfg).unwrap();
    assert!(!out.summary.converged);
    assert!(out.error.as_deref().unwrap_or("").contains("diverged"));
    assert!(out.report.is_some());
}

#[test]
fn exhausted_budget_is_not_converged() {
    let mut cfg = config(PhysicsName::Thermal, Geometry::TwoPatch2d, Variant::SyncFixed);
    cfg.solver.max_iter = 3;
    let out = run_scenario(&cfg).unwrap();
    assert!(!out.summary.converged);
    assert_eq!(out.summary.iterations, 3);
}
