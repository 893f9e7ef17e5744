use asyncgl_core::model_problems::{chain_1d, fine_equals_global, fine_patch, two_patch_2d};
use asyncgl_core::spectral::{
    companion_from_blocks, generalized_spectrum, matrix_eigenvalues, matrix_spectral_radius, max_admissible_omega,
    CompanionFactory,
};
use asyncgl_core::*;
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    matrix_eigenvalues(m).unwrap()
}

fn same_spectrum(a: &[Complex<f64>], b: &[Complex<f64>], tol: f64) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| (x - y).norm() <= tol))
}

/// Like [`same_spectrum`], except that eigenvalues within `cluster` of 0
/// only need a partner in the same cluster: a zero block `X_k` makes 0 a
/// defective eigenvalue, computed to about √ε only.
fn same_spectrum_up_to_zero_cluster(a: &[Complex<f64>], b: &[Complex<f64>], tol: f64, cluster: f64) -> bool {
    let matched = |x: &Complex<f64>, other: &[Complex<f64>]| {
        if x.norm() <= cluster {
            other.iter().any(|y| y.norm() <= cluster)
        } else {
            other.iter().any(|y| (x - y).norm() <= tol)
        }
    };
    let count = |v: &[Complex<f64>]| v.iter().filter(|z| z.norm() <= cluster).count();
    a.len() == b.len() && count(a) == count(b) && a.iter().all(|x| matched(x, b)) && b.iter().all(|y| matched(y, a))
}

fn all_fresh(sc: &CouplingScenario, d: usize) -> Vec<Vec<usize>> {
    let mut p = vec![Vec::new(); d + 1];
    p[0] = (0..sc.subdomains.len()).collect();
    p
}

/// `[0,2]×[0,1]` tiled by two patches whose fine models are the global
/// restriction with coefficients scaled by `c`.
fn scaled_tiling(physics: Physics, c: f64) -> CouplingScenario {
    let grid = StructuredGrid::new(2, [0.0; 3], &[2.0, 1.0], &[4, 2]).unwrap();
    let mut global = build_grid_mesh(&grid);
    global.fix_nodes_where(|p| p[0].abs() < 1e-12);
    let patches = (0..2)
        .map(|k| {
            let x = k as f64;
            let region = Region::new([x, 0.0, 0.0], [x + 1.0, 1.0, 0.0]);
            let fine = fine_patch(&grid, &region, 1, Material::default().scaled(c), None).unwrap();
            PatchDefinition { id: k + 1, region, fine }
        })
        .collect();
    CouplingScenario::build(physics, Loading::source(1.0), global, patches).unwrap()
}

#[test]
fn alphas_match_dense_generalized_eigensolve() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let (lo, hi) = generalized_alphas(&sc).unwrap();
        // brute force: eigenvalues of S^{G⁻¹} ΣŜ, which solve det(ΣŜ − α S^G) = 0
        let m = sc.global_schur.clone().lu().solve(&sc.sum_hat_fine()).unwrap();
        let eig = eigenvalues(&m);
        assert!(eig.iter().all(|z| z.im.abs() < 1e-8));
        let bmin = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let bmax = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - bmin).abs() <= 1e-8 * bmax, "{physics:?}");
        assert!((hi - bmax).abs() <= 1e-8 * bmax, "{physics:?}");
        assert!(0.0 < lo && lo <= hi);
        for alpha in [lo, hi] {
            let det = (sc.sum_hat_fine() - &sc.global_schur * alpha).determinant();
            let scale = sc.global_schur.determinant().abs();
            assert!(det.abs() <= 1e-6 * scale, "{physics:?} {alpha}: {det:e}");
        }
    }
}

#[test]
fn matching_and_scaled_models_give_constant_alpha() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = fine_equals_global(physics).unwrap();
        let (lo, hi) = generalized_alphas(&sc).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        for c in [0.25, 3.0] {
            let sc = scaled_tiling(physics, c);
            assert!(sc.complement.is_none());
            let spectrum = generalized_spectrum(&sc.sum_hat_fine(), &sc.global_schur).unwrap();
            assert!(spectrum.iter().all(|a| (a - c).abs() < 1e-10 * c), "{physics:?} c={c}");
        }
    }
}

#[test]
fn symmetrized_blocks_are_similar() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let factory = CompanionFactory::new(&sc);
    let l = sc.global_cholesky_l();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [1usize, 2] {
        let partition = factory.random_partition(d, &mut rng);
        let omega = 0.3;
        let sys = build_companion(&sc, &partition, omega, d).unwrap();
        let hat_blocks: Vec<DMatrix<f64>> = partition
            .iter()
            .map(|set| {
                let mut sum = DMatrix::zeros(sc.interface_size(), sc.interface_size());
                for &s in set {
                    sum += sc.hat_fine(s);
                }
                let y = l.solve_lower_triangular(&sum).unwrap();
                l.solve_lower_triangular(&y.transpose()).unwrap().transpose()
            })
            .collect();
        for h in &hat_blocks {
            assert!((h - h.transpose()).amax() <= 1e-10 * h.amax().max(1e-300));
        }
        let sym = companion_from_blocks(hat_blocks, omega).unwrap();
        let (a, b) = (eigenvalues(&sys.matrix), eigenvalues(&sym.matrix));
        assert!(same_spectrum_up_to_zero_cluster(&a, &b, 1e-9, 1e-6), "D={d}");
        assert!((spectral_radius(&sys).unwrap() - spectral_radius(&sym).unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn eigenvalues_are_characteristic_roots() {
    let sc = chain_1d(0.5).unwrap();
    assert_eq!(sc.interface_size(), 2);
    let factory = CompanionFactory::new(&sc);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for d in [1usize, 2, 3] {
        for omega in [0.2, 0.9, 1.7] {
            let partition = factory.random_partition(d, &mut rng);
            let sys = build_companion(&sc, &partition, omega, d).unwrap();
            let eig = eigenvalues(&sys.matrix);
            assert_eq!(eig.len(), 2 * (d + 1));
            for z in eig {
                let p = sys.characteristic(z);
                assert!(p.norm() <= 1e-8, "D={d} ω={omega} λ={z}: {p}");
            }
        }
    }
}

#[test]
fn scalar_two_by_two_companion() {
    let (a, b, omega) = (0.6, 0.3, 0.8);
    let sys = companion_from_blocks(vec![DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b)], omega)
        .unwrap();
    // roots of λ² − (1 − ωa) λ + ωb
    let tr = 1.0 - omega * a;
    let disc = Complex::new(tr * tr - 4.0 * omega * b, 0.0).sqrt();
    let roots = [(Complex::new(tr, 0.0) + disc) / 2.0, (Complex::new(tr, 0.0) - disc) / 2.0];
    assert!(same_spectrum(&eigenvalues(&sys.matrix), &roots, 1e-12));
    let rho = spectral_radius(&sys).unwrap();
    assert!((rho - roots[0].norm().max(roots[1].norm())).abs() < 1e-12);
}

#[test]
fn matching_models_sync_radius() {
    let sc = fine_equals_global(Physics::Thermal).unwrap();
    let partition = all_fresh(&sc, 0);
    let rho = |omega| spectral_radius(&build_companion(&sc, &partition, omega, 0).unwrap()).unwrap();
    assert!(rho(1.0) < 1e-10);
    assert!((rho(2.2) - 1.2).abs() < 1e-10);
    // D = 1 with everything fresh: top row [I − ωI, 0]
    let sys = build_companion(&sc, &all_fresh(&sc, 1), 0.4, 1).unwrap();
    let n = sc.interface_size();
    let top = sys.matrix.view((0, 0), (n, n)).into_owned();
    assert!((top - DMatrix::identity(n, n) * 0.6).amax() < 1e-10);
    assert!(sys.matrix.view((0, n), (n, n)).amax() < 1e-10);
    for z in eigenvalues(&sys.matrix) {
        assert!(z.norm() < 1e-8 || (z - Complex::new(0.6, 0.0)).norm() < 1e-8);
    }
    for omega in [0.1, 1.0, 1.9] {
        assert!(certify_paracontraction(&sc, omega, 0, 3, 0).unwrap().passed());
    }
}

#[test]
fn zero_relaxation_spectrum() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let factory = CompanionFactory::new(&sc);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sys = build_companion(&sc, &factory.random_partition(2, &mut rng), 0.0, 2).unwrap();
    for z in eigenvalues(&sys.matrix) {
        assert!(z.norm() < 1e-6 || (z - Complex::new(1.0, 0.0)).norm() < 1e-6, "{z}");
    }
}

#[test]
fn reference_load_is_companion_fixed_point() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let reference = monolithic_reference(&sc).unwrap();
    let b_hat = hat_rhs(&sc);
    let factory = CompanionFactory::new(&sc);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [0usize, 1, 3] {
        let sys = build_companion(&sc, &factory.random_partition(d, &mut rng), 0.5, d).unwrap();
        let defect = sys.fixed_point_defect(&reference.p_gamma, &b_hat);
        assert!(defect.amax() <= 1e-10 * reference.p_gamma.amax().max(b_hat.amax()), "D={d}");
    }
}

#[test]
fn certificate_passes_below_bound_and_fails_above_sync() {
    for physics in [Physics::Thermal, Physics::Elasticity] {
        let sc = two_patch_2d(physics).unwrap();
        let (lo, hi) = generalized_alphas(&sc).unwrap();
        let b2 = relaxation_bounds(lo, hi, 2).unwrap();
        let report = certify_paracontraction(&sc, 0.5 * b2.omega_async_factor.unwrap(), 2, 100, 1).unwrap();
        assert!(report.passed());
        assert_eq!(report.trials.len(), 100);
        let fail = certify_paracontraction(&sc, 1.5 * b2.omega_sync, 0, 5, 1).unwrap();
        assert!(!fail.passed());
        assert!(fail.max_rho() > 1.0);
        // the sync radius is |1 − ω α| at the extreme α
        let omega = 1.5 * b2.omega_sync;
        let expected = (1.0 - omega * lo).abs().max((1.0 - omega * hi).abs());
        assert!((fail.max_rho() - expected).abs() < 1e-8);
    }
}

#[test]
fn admissible_relaxation_exceeds_certified_factor() {
    let sc = two_patch_2d(Physics::Thermal).unwrap();
    let (lo, hi) = generalized_alphas(&sc).unwrap();
    for d in [1usize, 2] {
        let factor = relaxation_bounds(lo, hi, d).unwrap().omega_async_factor.unwrap();
        let best = max_admissible_omega(&sc, d, 20, 3, (factor, 2.0 / hi), 20).unwrap();
        assert!(best > factor, "D={d}");
    }
}

#[test]
fn certificate_csv_round_trip() {
    let sc = chain_1d(0.5).unwrap();
    let report = certify_paracontraction(&sc, 0.1, 2, 4, 0).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), vec!["trial", "D", "omega", "rho", "pass"]);
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for (row, trial) in rows.iter().zip(&report.trials) {
        assert_eq!(row[3].parse::<f64>().unwrap(), trial.rho);
    }
}

#[test]
fn radius_of_random_matrix_matches_power_iteration() {
    let m = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0);
    let rho = matrix_spectral_radius(&m).unwrap();
    // nonnegative irreducible matrix: Perron root via power iteration
    let mut v = DVector::from_element(6, 1.0);
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = &m * &v;
        lambda = w.norm() / v.norm();
        v = w / lambda;
    }
    assert!((rho - lambda).abs() < 1e-10);
}

proptest! {
    #[test]
    fn async_factor_decreases_with_delay(lo in 0.01f64..1.0, ratio in 1.0f64..50.0) {
        let hi = lo * ratio;
        let mut last = f64::INFINITY;
        for d in 1..=6 {
            let b = relaxation_bounds(lo, hi, d).unwrap();
            let f = b.omega_async_factor.unwrap();
            prop_assert!(f < last);
            prop_assert!(f <= b.omega_sync);
            let eps = b.epsilon.unwrap();
            prop_assert!(eps > 0.0 && eps <= 0.5);
            last = f;
        }
    }
}
