use barkley_bench::{front_field, singular_loop, EPS, R};
use barkley_core::melnikov::{kernel_integrals, kernel_rate, DEFAULT_QUAD_TOL};
use barkley_core::{
    classify_hyperbolicity, eval_melnikov_suite, return_times, solve_loop, step_field, ModelParams, ShootConfig,
    Side,
};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn melnikov(c: &mut Criterion) {
    let lp = singular_loop();
    let k = kernel_rate(&lp, Side::Front);
    c.bench_function("kernel_integrals", |b| b.iter(|| kernel_integrals(black_box(k), DEFAULT_QUAD_TOL).unwrap()));
    c.bench_function("eval_melnikov_suite", |b| b.iter(|| eval_melnikov_suite(black_box(R), DEFAULT_QUAD_TOL).unwrap()));
}

fn pde(c: &mut Criterion) {
    let (field, cfg) = front_field(1000);
    c.bench_function("step_field/n=1000", |b| b.iter(|| step_field(black_box(&field), &cfg).unwrap()));
}

fn orbits(c: &mut Criterion) {
    let lp = singular_loop();
    let mut group = c.benchmark_group("shooting");
    group.sample_size(10);
    group.bench_function("solve_loop", |b| {
        b.iter(|| solve_loop(R, EPS, 0.0, (lp.d0, lp.mu0), &ShootConfig::default()).unwrap())
    });
    group.finish();
    let params = ModelParams::from_mu(R, lp.d0, lp.mu0, EPS, 0.0).unwrap();
    let h = classify_hyperbolicity(&lp.eqs, &params).unwrap();
    c.bench_function("return_times/N=8", |b| {
        b.iter(|| return_times(black_box(0.1), 8, &h.x1.spectral, &h.x2.spectral).unwrap())
    });
}

criterion_group!(benches, melnikov, pde, orbits);
criterion_main!(benches);
