use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use psihash::{
    dense_matvec, fwht_normalized, p_chromatic_number, toeplitz_matvec, ColoringMode, Family,
    SubsetStructure, ToeplitzSpec, Variant,
};
use psihash_bench::{pipeline, test_vector};

fn fwht(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwht");
    for e in [8u32, 12, 16] {
        let x = test_vector(1 << e);
        group.bench_with_input(BenchmarkId::from_parameter(1usize << e), &x, |b, x| {
            b.iter(|| fwht_normalized(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn toeplitz(c: &mut Criterion) {
    let mut group = c.benchmark_group("toeplitz_matvec");
    for n in [64usize, 256, 1024] {
        let k = n / 4;
        let spec = ToeplitzSpec::new(test_vector(2 * n - 1)).unwrap();
        let dense = spec.to_dense(k);
        let x = test_vector(n);
        group.bench_with_input(BenchmarkId::new("fft", n), &x, |b, x| {
            b.iter(|| toeplitz_matvec(&spec, black_box(x), k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("dense", n), &x, |b, x| {
            b.iter(|| dense_matvec(&dense, black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn hashing(c: &mut Criterion) {
    let mut group = c.benchmark_group("hash");
    let n = 1000;
    let x = test_vector(n);
    for variant in [Variant::Extended, Variant::Short] {
        for family in [Family::Toeplitz, Family::Circulant] {
            let p = pipeline(variant, family, 256, n);
            group.bench_function(format!("{variant}/{family}/k256/n1000"), |b| {
                b.iter(|| p.hash(black_box(&x)).unwrap())
            });
        }
    }
    let batch: Vec<Vec<f64>> = (0..256).map(|i| test_vector(n + i)[i..].to_vec()).collect();
    let p = pipeline(Variant::Extended, Family::Toeplitz, 256, n);
    group.bench_function("batch256/extended/toeplitz", |b| {
        b.iter(|| p.hash_batch(black_box(&batch)).unwrap())
    });
    group.finish();
}

fn chromatic(c: &mut Criterion) {
    let mut group = c.benchmark_group("p_chromatic");
    let s = SubsetStructure::circulant(8, 16).unwrap();
    group.bench_function("exact/circulant/k8/n16", |b| {
        b.iter(|| p_chromatic_number(black_box(&s), ColoringMode::exact()).unwrap())
    });
    let s = SubsetStructure::toeplitz(32, 256).unwrap();
    group.bench_function("greedy/toeplitz/k32/n256", |b| {
        b.iter(|| p_chromatic_number(black_box(&s), ColoringMode::Greedy).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fwht, toeplitz, hashing, chromatic);
criterion_main!(benches);
