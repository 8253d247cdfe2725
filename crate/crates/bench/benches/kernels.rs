use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kamred::block::{compose, decay_norm};
use kamred::kam::solve_homological;
use kamred::spectral::gaunt_coefficient;
use kamred::{HarmonicIndex, SphereSpec};
use kamred_bench::fixture;
use std::hint::black_box;

fn block_products(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose");
    for (k_max, l_max) in [(3, 2), (5, 2), (8, 4)] {
        let f = fixture(k_max, l_max);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("K{k_max}_L{l_max}")),
            &f.m,
            |b, m| b.iter(|| compose(black_box(m), black_box(m)).unwrap()),
        );
    }
    group.finish();
}

fn norms(c: &mut Criterion) {
    let f = fixture(8, 4);
    c.bench_function("decay_norm/K8_L4", |b| {
        b.iter(|| decay_norm(black_box(&f.m), 2.5, 0.5))
    });
}

fn homological(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_homological");
    for k_max in [4, 8] {
        let f = fixture(k_max, 4);
        group.bench_function(BenchmarkId::from_parameter(format!("K{k_max}_L4")), |b| {
            b.iter(|| solve_homological(&f.omega, &f.nf, black_box(&f.m), &f.params, 4).unwrap())
        });
    }
    group.finish();
}

fn gaunt(c: &mut Criterion) {
    let spec = SphereSpec::two_sphere(8);
    let a = HarmonicIndex::new(3, 1).unwrap();
    let b = HarmonicIndex::new(5, -2).unwrap();
    let h = HarmonicIndex::new(6, -1).unwrap();
    c.bench_function("gaunt_coefficient/3_5_6", |bench| {
        bench.iter(|| gaunt_coefficient(&spec, black_box(a), black_box(b), black_box(h)).unwrap())
    });
}

criterion_group!(benches, block_products, norms, homological, gaunt);
criterion_main!(benches);
