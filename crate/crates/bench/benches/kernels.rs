use asyncgl_core::model_problems::{cube_grid_3d, two_patch_2d};
use asyncgl_core::{build_companion, compute_residual, condense, monolithic_reference, spectral_radius, Physics};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn condensation(c: &mut Criterion) {
    let mut group = c.benchmark_group("condensation");
    for (name, scenario) in [
        ("two-patch-2d-thermal", two_patch_2d(Physics::Thermal).unwrap()),
        ("two-patch-2d-elasticity", two_patch_2d(Physics::Elasticity).unwrap()),
    ] {
        let patch = scenario.subdomains.last().unwrap();
        let interface = patch.fine_condensed.interface.clone();
        group.bench_function(name, |b| {
            b.iter(|| condense(black_box(&patch.fine_system), &interface, "bench").unwrap())
        });
    }
    group.finish();
}

fn residual(c: &mut Criterion) {
    let mut group = c.benchmark_group("residual");
    for (name, scenario) in [
        ("two-patch-2d-elasticity", two_patch_2d(Physics::Elasticity).unwrap()),
        ("cube-grid-3d-n2-thermal", cube_grid_3d(Physics::Thermal, 2, None).unwrap()),
    ] {
        let u = scenario.solve_global_schur(&scenario.global_rhs);
        group.bench_function(name, |b| b.iter(|| compute_residual(&scenario, black_box(&u))));
    }
    group.finish();
}

fn companion(c: &mut Criterion) {
    let scenario = two_patch_2d(Physics::Thermal).unwrap();
    let mut group = c.benchmark_group("companion-rho");
    group.sample_size(10);
    for d in [1usize, 2] {
        // complement fresh, patches at delays 1 and d
        let mut partition = vec![Vec::new(); d + 1];
        partition[0].push(0);
        partition[1].push(1);
        partition[d].push(2);
        group.bench_function(format!("two-patch-2d-thermal-D{d}"), |b| {
            b.iter(|| spectral_radius(&build_companion(&scenario, &partition, 0.05, d).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn reference(c: &mut Criterion) {
    let scenario = two_patch_2d(Physics::Elasticity).unwrap();
    let mut group = c.benchmark_group("monolithic-reference");
    group.sample_size(10);
    group.bench_function("two-patch-2d-elasticity", |b| b.iter(|| monolithic_reference(&scenario).unwrap()));
    group.finish();
}

criterion_group!(kernels, condensation, residual, companion, reference);
criterion_main!(kernels);
