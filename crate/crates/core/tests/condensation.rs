mod common;

use asyncgl_core::condense;
use common::{random_interface, random_spd_system, rel, system};
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn condensed_solve_matches_direct(n in 2usize..=50, seed in any::<u64>()) {
        let (k, f) = random_spd_system(n, seed);
        let iface = random_interface(n, seed);
        let op = condense(&system(&k, &f), &iface, "random").unwrap();
        let u_gamma = op.schur.clone().cholesky().unwrap().solve(&op.rhs);
        let u = op.expand_interior(&u_gamma).unwrap();
        let direct = k.cholesky().unwrap().solve(&f);
        prop_assert!(rel(&u, &direct) <= 1e-10, "rel {}", rel(&u, &direct));
    }

    #[test]
    fn schur_is_symmetric(n in 2usize..=50, seed in any::<u64>()) {
        let (k, f) = random_spd_system(n, seed);
        let op = condense(&system(&k, &f), &random_interface(n, seed), "random").unwrap();
        let s = &op.schur;
        prop_assert!((s - s.transpose()).norm() <= 1e-10 * s.norm());
        prop_assert!(s.clone().cholesky().is_some());
    }

    #[test]
    fn harmonic_extension_energy(n in 2usize..=40, seed in any::<u64>()) {
        let (k, _) = random_spd_system(n, seed);
        let f = DVector::zeros(n);
        let iface = random_interface(n, seed);
        let op = condense(&system(&k, &f), &iface, "random").unwrap();
        let u_gamma = DVector::from_fn(iface.len(), |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let u = op.expand_interior(&u_gamma).unwrap();
        let e_gamma = u_gamma.dot(&(&op.schur * &u_gamma));
        let e_full = u.dot(&(&k * &u));
        prop_assert!((e_gamma - e_full).abs() <= 1e-10 * e_full.abs().max(1.0));
    }

    #[test]
    fn interior_rows_satisfied(n in 2usize..=50, seed in any::<u64>()) {
        let (k, f) = random_spd_system(n, seed);
        let iface = random_interface(n, seed);
        let op = condense(&system(&k, &f), &iface, "random").unwrap();
        let u_gamma = DVector::from_element(iface.len(), 0.5);
        let u = op.expand_interior(&u_gamma).unwrap();
        let residual = &k * &u - &f;
        for &i in &op.interior {
            prop_assert!(residual[i].abs() <= 1e-10 * f.amax().max(k.amax()));
        }
    }
}
