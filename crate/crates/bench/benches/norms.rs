use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use varexp_core::{
    build_embedding, mixed_norm, nakano_norm, norm, validate_exponent, Exponent, ModularKind, NonnegMatrix, Partition,
    SmoothExponent, SolveConfig, StepFunction,
};

fn uniform(cells: usize, value: impl Fn(usize) -> f64) -> StepFunction {
    let breaks = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    StepFunction::new(Partition::new(breaks).unwrap(), (0..cells).map(value).collect()).unwrap()
}

fn inputs(cells: usize) -> (StepFunction, Exponent) {
    let f = uniform(cells, |i| 1.0 + (i as f64 * 0.7).sin());
    let p = validate_exponent(uniform(cells, |i| 1.5 + 3.0 * ((i * 37) % cells) as f64 / cells as f64)).unwrap();
    (f, p)
}

fn bench_norm(c: &mut Criterion) {
    let cfg = SolveConfig::default();
    let mut group = c.benchmark_group("norm");
    for cells in [8, 64, 512] {
        let (f, p) = inputs(cells);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &(f, p), |b, (f, p)| {
            b.iter(|| norm(black_box(f), black_box(p), &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_nakano(c: &mut Criterion) {
    let mut group = c.benchmark_group("nakano");
    for cells in [8, 64, 512] {
        let (f, p) = inputs(cells);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &(f, p), |b, (f, p)| {
            b.iter(|| nakano_norm(black_box(f), black_box(p), ModularKind::Psi, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn bench_mixed(c: &mut Criterion) {
    let rows: Vec<Vec<f64>> =
        (0..64).map(|i| (0..64).map(|j| ((i * 31 + j * 17) % 23) as f64 / 23.0).collect()).collect();
    let a = NonnegMatrix::new(rows).unwrap();
    c.bench_function("mixed_norm 64x64", |b| b.iter(|| mixed_norm(black_box(&a), 1.5, 3.0)));
}

fn bench_embedding(c: &mut Criterion) {
    let mut group = c.benchmark_group("embedding");
    group.sample_size(10);
    let source = SmoothExponent::affine();
    for nodes in [256, 1024] {
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |b, &n| {
            b.iter(|| build_embedding(black_box(&source), n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_norm, bench_nakano, bench_mixed, bench_embedding);
criterion_main!(benches);
