use criterion::{criterion_group, criterion_main, Criterion};
use nearflat_bench::{flat_mesh, schwarzschild};
use nearflat_core::capacity::{check_w_monotonicity, solve_capacitary_potential};
use nearflat_core::dpmetric::{dp_distance, DpOptions};
use nearflat_core::isoperimetric::profile_centered;
use nearflat_core::sobolev::{optimal_radial_constant_with, SobolevOptions};
use nearflat_core::willmore::{beta_integrals_closed_form, chain_integrals, ChainCalibration};
use std::hint::black_box;

fn closed_forms(c: &mut Criterion) {
    c.bench_function("beta_integrals_closed_form", |b| {
        b.iter(|| beta_integrals_closed_form(black_box(37.0)).unwrap())
    });
    c.bench_function("chain_integrals", |b| b.iter(|| chain_integrals(black_box(37.0), 0.9).unwrap()));
    c.bench_function("chain_calibration", |b| b.iter(|| ChainCalibration::new(black_box(2.0)).unwrap()));
}

fn radial_solvers(c: &mut Criterion) {
    let g = schwarzschild();
    let mut group = c.benchmark_group("radial");
    group.sample_size(10);
    group.bench_function("capacity_w_monotonicity", |b| {
        b.iter(|| check_w_monotonicity(&solve_capacitary_potential(&g, 1.0).unwrap(), 1e-9).unwrap())
    });
    group.bench_function("profile_centered", |b| b.iter(|| profile_centered(&g).unwrap()));
    let opts = SobolevOptions {
        nodes: 512,
        ..SobolevOptions::default()
    };
    group.bench_function("sobolev_descent_512", |b| b.iter(|| optimal_radial_constant_with(&g, &opts).unwrap()));
    group.finish();
}

fn dp_solver(c: &mut Criterion) {
    let mesh = flat_mesh(16);
    let opts = DpOptions::default();
    let mut group = c.benchmark_group("dp");
    group.sample_size(10);
    for p in [4.0, 6.0, 10.0] {
        group.bench_function(format!("dp_distance_p{p}"), |b| {
            b.iter(|| dp_distance(&mesh, 0, mesh.vertex(12, 3), p, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, closed_forms, radial_solvers, dp_solver);
criterion_main!(benches);
