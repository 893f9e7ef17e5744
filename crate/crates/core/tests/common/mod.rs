#![allow(dead_code)]

use asyncgl_core::AssembledSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random SPD system `K = M Mᵀ + n I` with a random load.
pub fn random_spd_system(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let k = &m * m.transpose() + DMatrix::identity(n, n) * n as f64;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (k, f)
}

/// Random non-empty interface subset of `0..n`, in shuffled order.
pub fn random_interface(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut dofs: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
    if dofs.is_empty() {
        dofs.push(rng.random_range(0..n));
    }
    for i in (1..dofs.len()).rev() {
        dofs.swap(i, rng.random_range(0..=i));
    }
    dofs
}

pub fn system(k: &DMatrix<f64>, f: &DVector<f64>) -> AssembledSystem {
    AssembledSystem::from_dense(k, f.clone())
}

pub fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
