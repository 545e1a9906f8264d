use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairline_bench::{fleet, fleet_rates, random_front, sample_windows};
use fairline_core::{aoi, fairness, metrics};

fn aoi_models(c: &mut Criterion) {
    let mut g = c.benchmark_group("shs_solution");
    for n in [1, 3, 6] {
        let rates = fleet_rates(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &rates, |b, r| b.iter(|| aoi::shs_solution(black_box(r))));
    }
    g.finish();

    let rates = fleet_rates(3);
    c.bench_function("simulate_shs/1e5_events", |b| b.iter(|| aoi::simulate_shs(&rates, 1, 100_000, 3)));
}

fn fairness_models(c: &mut Criterion) {
    let mut g = c.benchmark_group("fairness_report");
    for n in [3, 6] {
        let (s, w) = (fleet(n), sample_windows(n));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fairness::fairness_report(black_box(&w), &s))
        });
    }
    g.finish();
}

fn hypervolume(c: &mut Criterion) {
    let mut g = c.benchmark_group("hypervolume_4d");
    for n in [50, 200] {
        let pts = random_front(n, 4, 7);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, p| {
            b.iter(|| metrics::hypervolume(black_box(p), &[1.1; 4]))
        });
    }
    g.finish();

    let pts = random_front(500, 4, 8);
    c.bench_function("hv_tracker_4d/500", |b| {
        b.iter(|| {
            let mut t = metrics::HvTracker::new(vec![1.1; 4]);
            for p in &pts {
                t.add(p);
            }
            t.value()
        })
    });
}

criterion_group!(benches, aoi_models, fairness_models, hypervolume);
criterion_main!(benches);
