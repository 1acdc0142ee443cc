use anosov_core::dimensions::{covering_number, limit_set_sample, ShellCache};
use anosov_core::functionals::falconer_functional;
use anosov_core::matrixops::{jacobi_svd, Mat};
use anosov_core::{Representation, Signature, UnimodularMatrix, WeylVector, Word};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn pingpong() -> Representation {
    let a = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
    let b = UnimodularMatrix::from_rows(&[
        vec![0.8407869243262288, 0.04690487830435326, -0.6347538003973724],
        vec![0.04690487830435326, 1.8142620694285791, -1.661330017944437],
        vec![-0.6347538003973724, -1.661330017944437, 2.5949510062451915],
    ])
    .unwrap();
    Representation::standard(vec![a, b]).unwrap()
}

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi_svd");
    for d in [3usize, 5, 8] {
        let m = Mat::from_fn(d, d, |i, j| ((i * 7 + j * 3) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |bch, m| bch.iter(|| jacobi_svd(black_box(m))));
    }
    group.finish();
}

fn graded_product(c: &mut Criterion) {
    let rho = pingpong();
    let w: Word = rho.generators().parse(&"ab'".repeat(20)).unwrap();
    c.bench_function("graded_product_len60", |bch| {
        bch.iter(|| rho.graded(black_box(&w)).unwrap().log_singular_values())
    });
}

fn functional(c: &mut Criterion) {
    let a = WeylVector::new(vec![2.0, 1.2, 0.3, -0.4, -1.1, -2.0]).unwrap();
    let sig = Signature::new(6, vec![1, 3, 4]).unwrap();
    c.bench_function("falconer_functional_d6", |bch| {
        bch.iter(|| falconer_functional(black_box(&a), &sig, black_box(3.7)).unwrap())
    });
}

fn pressure(c: &mut Criterion) {
    let rho = pingpong();
    let sig = Signature::new(3, vec![1, 2]).unwrap();
    let mut group = c.benchmark_group("pressure");
    group.sample_size(10);
    group.bench_function("shell_cache_6_9", |bch| bch.iter(|| ShellCache::new(&rho, &sig, 6, 9).unwrap()));
    let cache = ShellCache::new(&rho, &sig, 6, 9).unwrap();
    group.bench_function("curve_eval", |bch| bch.iter(|| cache.pressure(black_box(1.3))));
    group.finish();
}

fn covering(c: &mut Criterion) {
    let rho = pingpong();
    let sig = Signature::new(3, vec![1, 2]).unwrap();
    let cloud = limit_set_sample(&rho, &sig, 10, 1000, 1, 1e-9).unwrap();
    let mut group = c.benchmark_group("covering_number");
    group.sample_size(10);
    for eps in [0.2, 0.05] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |bch, &eps| {
            bch.iter(|| covering_number(&cloud, eps).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, svd, graded_product, functional, pressure, covering);
criterion_main!(benches);
