use criterion::{black_box, criterion_group, criterion_main, Criterion};

use decolab_bench::{qubit_cfg, sinc};
use decolab_core::densities::{grid_density, nyquist_spacing};
use decolab_core::*;

fn closed_forms(c: &mut Criterion) {
    let cfg = qubit_cfg();
    let kernel = PiecewiseKernel::qubit(&cfg).unwrap();
    c.bench_function("i_qubit_closed", |bch| {
        bch.iter(|| i_qubit_closed(&cfg, black_box(1.5), black_box(-2.0), black_box(0.15)))
    });
    c.bench_function("s_kernel_eval", |bch| {
        bch.iter(|| kernel.eval(black_box(0.5), black_box(1.5), black_box(-2.0)))
    });
}

fn quadratures(c: &mut Criterion) {
    let cfg = qubit_cfg();
    let spec = DecoherenceFactorSpec::new(SystemKind::Qubit, sinc(0.25), cfg, (0, 1), (1.5, -2.0), 0.15).unwrap();
    let (probe, pointer) = (sinc(0.25), sinc(1.0));
    c.bench_function("i_quadrature", |bch| {
        bch.iter(|| i_quadrature(black_box(&spec)).unwrap())
    });
    c.bench_function("s_quadrature", |bch| {
        bch.iter(|| s_quadrature(&cfg, &probe, &pointer, 0.5, -0.5, black_box(0.5), 1.5, -2.0).unwrap())
    });
}

fn densities(c: &mut Criterion) {
    let cfg = qubit_cfg();
    let (probe, pointer) = (sinc(0.25), sinc(1.0));
    let level = PointerLevel::Qubit(Sign::Plus);
    let h = nyquist_spacing(level, &cfg, &pointer).unwrap();
    let mut group = c.benchmark_group("density");
    group.sample_size(10);
    group.bench_function("analytic", |bch| {
        bch.iter(|| qubit_density(Sign::Plus, 4.0, 1.0, 1.0).unwrap().eval(black_box(1.5)))
    });
    group.bench_function("grid_1024", |bch| {
        bch.iter(|| grid_density(level, &cfg, &pointer, &probe, h, 1024, 400).unwrap())
    });
    group.finish();
}

criterion_group!(benches, closed_forms, quadratures, densities);
criterion_main!(benches);
