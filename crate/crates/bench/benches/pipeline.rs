use criterion::{criterion_group, criterion_main, Criterion};
use hintclust::mutual::run_prepared;
use hintclust::spectral::init_embedding;
use hintclust::stiefel::SideProblem;
use hintclust::{build_similarity, curvilinear_solve, SearchParams};
use hintclust_bench::{options, prepared};

fn similarity(c: &mut Criterion) {
    let p = prepared(200, 1);
    let w = p.sim1.weights.clone();
    c.bench_function("build_similarity n=200", |b| {
        b.iter(|| build_similarity(&p.counts1, &w).unwrap())
    });
}

fn single_search(c: &mut Criterion) {
    let p = prepared(200, 2);
    let x0 = init_embedding(&p.sim1, 4, 2).unwrap();
    let f = SideProblem::uncoupled(&p.lap1.normalized, 1.0);
    let params = SearchParams::default();
    c.bench_function("curvilinear_solve n=200 k=4", |b| {
        b.iter(|| curvilinear_solve(&x0, &f, &params).unwrap())
    });
}

fn full_run(c: &mut Criterion) {
    let p = prepared(200, 3);
    let opts = options(3);
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    group.bench_function("run_prepared n=200 k=4", |b| {
        b.iter(|| run_prepared(&p, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, similarity, single_search, full_run);
criterion_main!(benches);
