use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spinsat::pmp::find_yc_with;
use spinsat::pmp::ShootingOptions;
use spinsat::{
    synthesize_local, synthesize_optimal, BlochState, LocalOptions, OptimalOptions, ScaledParams,
};

fn case1() -> ScaledParams {
    ScaledParams::new(3.5, 0.5).unwrap()
}

fn local(c: &mut Criterion) {
    let p = case1();
    let opts = LocalOptions::default();
    c.bench_function("local_case1", |b| {
        b.iter(|| synthesize_local(black_box(BlochState::NORTH_POLE), &p, &opts).unwrap())
    });
}

fn optimal(c: &mut Criterion) {
    let p = case1();
    let opts = OptimalOptions::default();
    c.bench_function("optimal_case1", |b| {
        b.iter(|| synthesize_optimal(black_box(BlochState::NORTH_POLE), &p, &opts).unwrap())
    });
}

fn shooting(c: &mut Criterion) {
    let p = case1();
    let opts = ShootingOptions::default();
    c.bench_function("find_yc_case1", |b| {
        b.iter(|| find_yc_with(black_box(&p), -1.0, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = local, optimal, shooting
}
criterion_main!(benches);
