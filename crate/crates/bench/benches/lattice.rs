use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grst_bench::{atm_call, brownian_schedule, caption_schedule};
use grst_core::baselines::{crr_params, price_multiplicative};
use grst_core::{build_grst0, build_grst_n, layer_moments, price_tree};
use std::hint::black_box;

fn construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    for steps in [64usize, 256, 1024] {
        group.bench_with_input(BenchmarkId::new("grst0", steps), &steps, |b, &n| {
            b.iter(|| build_grst0(100.0, 0.0, 20.0, 0.0, 1.0, black_box(n)).unwrap())
        });
        let schedule = brownian_schedule(4, 100.0, 20.0, 1.0).unwrap();
        group.bench_with_input(
            BenchmarkId::new("grst_n_4_segments", steps),
            &steps,
            |b, &n| b.iter(|| build_grst_n(&schedule, 100.0, black_box(n / 4 + 1)).unwrap()),
        );
    }
    let caption = caption_schedule().unwrap();
    group.bench_function("caption_k21", |b| {
        b.iter(|| build_grst_n(&caption, 0.0, black_box(21)).unwrap())
    });
    group.finish();
}

fn pricing(c: &mut Criterion) {
    let mut group = c.benchmark_group("price");
    let call = atm_call(100.0, 1.0).unwrap();
    for steps in [64usize, 256, 1024] {
        let tree = build_grst_n(
            &brownian_schedule(4, 100.0, 20.0, 1.0).unwrap(),
            100.0,
            steps / 4 + 1,
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::new("grst", steps), &tree, |b, t| {
            b.iter(|| price_tree(black_box(t), &call, 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("grst_moments", steps), &tree, |b, t| {
            b.iter(|| layer_moments(black_box(t), t.steps()).unwrap())
        });
        let p = crr_params(0.2, 0.05, 1.0 / steps as f64).unwrap();
        group.bench_with_input(BenchmarkId::new("crr", steps), &steps, |b, &n| {
            b.iter(|| price_multiplicative(&p, black_box(n), 100.0, &call, 0.05).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, construction, pricing);
criterion_main!(benches);
