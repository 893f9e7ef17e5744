use asyncgl_core::model_problems::{chain_1d, fine_equals_global, fine_patch, two_patch_2d};
use asyncgl_core::solvers::{compute_residual, global_solve, relative_error};
use asyncgl_core::*;
use nalgebra::{DMatrix, DVector};

/// Two unit elements on `[0, 2]`, both ends fixed, unit source; the right
/// element is a patch with diffusivity `c`. Then `S^G = [2]`, `ΣŜ = [1 + c]`.
fn scalar_chain(c: f64) -> CouplingScenario {
    let grid = StructuredGrid::new(1, [0.0; 3], &[2.0], &[2]).unwrap();
    let mut global = build_grid_mesh(&grid);
    global.fix_nodes_where(|p| p[0] < 1e-12 || p[0] > 2.0 - 1e-12);
    let region = Region::new([1.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
    let mut fine = fine_patch(&grid, &region, 1, Material::default().scaled(c), None).unwrap();
    fine.fix_nodes_where(|p| p[0] > 2.0 - 1e-12);
    CouplingScenario::build(
        Physics::Thermal,
        Loading::source(1.0),
        global,
        vec![PatchDefinition { id: 1, region, fine }],
    )
    .unwrap()
}

#[test]
fn scalar_surrogate_follows_geometric_series() {
    let c = 3.0;
    let sc = scalar_chain(c);
    assert_eq!(sc.global_schur[(0, 0)], 2.0);
    assert!((sc.sum_hat_fine()[(0, 0)] - (1.0 + c)).abs() < 1e-14);
    // hand solve of the merged chain: (1 + c) u = 1
    let u_star = 1.0 / (1.0 + c);
    let p_hat = 2.0 * u_star - 1.0;
    let alpha = (1.0 + c) / 2.0;
    for omega in [0.3, 0.6, 0.9] {
        let report = richardson_sync(&sc, Relaxation::Fixed(omega), StoppingCriteria::default()).unwrap();
        assert!(report.converged);
        for rec in &report.history {
            let expected = p_hat * (1.0 - (1.0 - omega * alpha).powi(rec.j as i32));
            assert!((rec.p_gamma[0] - expected).abs() < 1e-13, "ω={omega} j={}", rec.j);
        }
        assert!((report.final_u_gamma[0] - u_star).abs() < 1e-8);
    }
    // ω_sync = 2/α = 1
    let err = richardson_sync(&sc, Relaxation::Fixed(1.05), StoppingCriteria::default()).unwrap_err();
    match err {
        CouplingError::Divergence { report } => assert!(report.last_residual_norm() > 1e6 * report.initial_residual_norm()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn chain_reference_matches_merged_dense_solve() {
    let c = 0.5;
    let sc = chain_1d(c).unwrap();
    // merged chain: x = 1, 1.5, 2, 3 free; elements [0,1] a=1, two halves a=c, [2,3] a=1
    let nodes = [0.0, 1.0, 1.5, 2.0, 3.0];
    let coeff = [1.0, c, c, 1.0];
    let mut k = DMatrix::<f64>::zeros(5, 5);
    let mut f = DVector::<f64>::zeros(5);
    for e in 0..4 {
        let h = nodes[e + 1] - nodes[e];
        let s = coeff[e] / h;
        k[(e, e)] += s;
        k[(e + 1, e + 1)] += s;
        k[(e, e + 1)] -= s;
        k[(e + 1, e)] -= s;
        f[e] += h / 2.0;
        f[e + 1] += h / 2.0;
    }
    let kr = k.view((1, 1), (4, 4)).into_owned();
    let u = kr.cholesky().unwrap().solve(&f.rows(1, 4).into_owned());
    let reference = monolithic_reference(&sc).unwrap();
    assert_eq!(sc.interface_size(), 2);
    for (i, &dof) in sc.interface_dofs.iter().enumerate() {
        let (node, _) = sc.global_system.dof_map.node_of_free(dof);
        let x = sc.global_model.nodes[node][0];
        let idx = nodes.iter().position(|&n| (n - x).abs() < 1e-12).unwrap() - 1;
        assert!((reference.u_gamma[i] - u[idx]).abs() < 1e-12, "x = {x}");
    }
    let report = richardson_sync(&sc, Relaxation::aitken(), StoppingCriteria::with_tol(1e-12)).unwrap();
    assert!(relative_error(&report.final_u_gamma, &reference.u_gamma) < 1e-10);
}

#[test]
fn matching_fine_models_reference_is_global_solve() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = fine_equals_global(physics).unwrap();
        let reference = monolithic_reference(&sc).unwrap();
        let u0 = global_solve(&sc, &DVector::zeros(sc.interface_size()));
        assert!(relative_error(&reference.u_gamma, &u0) < 1e-10);
        for relaxation in [Relaxation::Fixed(1.0), Relaxation::aitken(), Relaxation::Fixed(0.3)] {
            let report = richardson_sync(&sc, relaxation, StoppingCriteria::default()).unwrap();
            assert!(report.converged);
            assert_eq!(report.iterations(), 0);
        }
    }
}

#[test]
fn global_solve_is_affine() {
    let sc = two_patch_2d(Physics::Elasticity).unwrap();
    let n = sc.interface_size();
    let p1 = DVector::from_fn(n, |i, _| (i as f64 * 0.7).cos());
    let p2 = DVector::from_fn(n, |i, _| 1.0 / (1.0 + i as f64));
    let u0 = global_solve(&sc, &DVector::zeros(n));
    let lhs = global_solve(&sc, &(&p1 + &p2));
    let rhs = global_solve(&sc, &p1) + global_solve(&sc, &p2) - &u0;
    assert!(relative_error(&lhs, &rhs) < 1e-12);
    assert!(relative_error(&u0, &sc.solve_global_schur(&sc.global_rhs)) < 1e-14);
}

#[test]
fn reference_is_a_fixed_point() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let reference = monolithic_reference(&sc).unwrap();
        let r0 = compute_residual(&sc, &global_solve(&sc, &DVector::zeros(sc.interface_size())));
        let at_star = compute_residual(&sc, &reference.u_gamma);
        assert!(at_star.norm() <= 1e-10 * r0.norm(), "{physics:?}");
        let u = global_solve(&sc, &reference.p_gamma);
        assert!(relative_error(&u, &reference.u_gamma) < 1e-12);
        assert!(compute_residual(&sc, &u).norm() <= 1e-10 * r0.norm());
    }
}

#[test]
fn sync_variants_reach_reference() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let reference = monolithic_reference(&sc).unwrap();
        let criteria = StoppingCriteria::default();
        for relaxation in [Relaxation::Fixed(1.0), Relaxation::aitken()] {
            let report = richardson_sync(&sc, relaxation, criteria).unwrap();
            assert!(report.converged);
            let final_r = compute_residual(&sc, &report.final_u_gamma);
            assert!(final_r.norm() <= criteria.tol * report.initial_residual_norm());
            let err = relative_error(&report.final_u_gamma, &reference.u_gamma);
            assert!(err <= 1e-8, "{physics:?} {relaxation:?}: {err:e}");
        }
    }
}

#[test]
fn thermal_unit_relaxation_iteration_envelope() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let report = richardson_sync(&sc, Relaxation::Fixed(1.0), StoppingCriteria::default()).unwrap();
    assert!(report.converged);
    assert!((5..=60).contains(&report.iterations()), "{}", report.iterations());
}

#[test]
fn relaxation_boundary_on_two_patch_fixtures() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let (_, alpha_max) = generalized_alphas(&sc).unwrap();
        let omega_sync = 2.0 / alpha_max;
        let ok = richardson_sync(&sc, Relaxation::Fixed(0.9 * omega_sync), StoppingCriteria::default()).unwrap();
        assert!(ok.converged);
        let bad = richardson_sync(&sc, Relaxation::Fixed(1.1 * omega_sync), StoppingCriteria::default());
        assert!(matches!(bad, Err(CouplingError::Divergence { .. })), "{physics:?}");
    }
}

#[test]
fn aitken_never_slower_than_unit_relaxation() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let fixed = richardson_sync(&sc, Relaxation::Fixed(1.0), StoppingCriteria::default()).unwrap();
        let aitken = richardson_sync(&sc, Relaxation::aitken(), StoppingCriteria::default()).unwrap();
        assert!(aitken.iterations() <= fixed.iterations());
        assert_eq!(aitken.omegas()[0], 1.0);
    }
}

#[test]
fn fixed_relaxation_tail_is_monotone() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let (_, alpha_max) = generalized_alphas(&sc).unwrap();
        for omega in [1.0, 0.5 * 2.0 / alpha_max] {
            let report = richardson_sync(&sc, Relaxation::Fixed(omega), StoppingCriteria::with_tol(1e-10)).unwrap();
            let norms: Vec<f64> = report.history.iter().map(|r| r.residual_norm).collect();
            let tail = &norms[norms.len() / 2..];
            assert!(tail.windows(2).all(|w| w[1] < w[0]), "{physics:?} ω={omega}");
        }
    }
}

#[test]
fn iteration_budget_exhaustion_is_not_an_error() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let criteria = StoppingCriteria {
        max_iter: 3,
        ..StoppingCriteria::default()
    };
    let report = richardson_sync(&sc, Relaxation::Fixed(1.0), criteria).unwrap();
    assert!(!report.converged);
    assert_eq!(report.history.len(), 4);
    assert_eq!(report.total_global_solves, 4);
    assert_eq!(report.per_patch_solves, vec![4, 4]);
}

#[test]
fn invalid_parameters_rejected() {
    let sc = chain_1d(1.0).unwrap();
    for bad in [Relaxation::Fixed(0.0), Relaxation::Fixed(-1.0), Relaxation::Fixed(f64::NAN)] {
        assert!(matches!(
            richardson_sync(&sc, bad, StoppingCriteria::default()),
            Err(CouplingError::InvalidArgument(_))
        ));
    }
    let criteria = StoppingCriteria {
        tol: 0.0,
        ..StoppingCriteria::default()
    };
    assert!(richardson_sync(&sc, Relaxation::Fixed(1.0), criteria).is_err());
}
