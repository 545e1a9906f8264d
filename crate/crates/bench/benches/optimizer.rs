use criterion::{criterion_group, criterion_main, Criterion};
use fairline_bench::fleet;
use fairline_core::experiment::OperatorChoice;
use fairline_core::moead::{self, OptimizerConfig};

fn weights(c: &mut Criterion) {
    c.bench_function("das_dennis/m4_p7", |b| b.iter(|| moead::das_dennis_weights(4, 7)));
    let w = moead::das_dennis_weights(4, 7);
    c.bench_function("neighborhoods/120_k20", |b| b.iter(|| moead::build_neighborhoods(&w, 20)));
}

fn runs(c: &mut Criterion) {
    let scenario = fleet(3);
    let config = OptimizerConfig { generations: 10, ..Default::default() };
    let mut g = c.benchmark_group("moead_10_generations");
    g.sample_size(10);
    for op in [OperatorChoice::Sbx, OperatorChoice::De, OperatorChoice::MockLlm] {
        g.bench_function(op.name(), |b| {
            b.iter(|| {
                let variation = op.build(config.rng_seed).unwrap();
                moead::evolve(&scenario, &config, variation.as_ref()).unwrap().len()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, weights, runs);
criterion_main!(benches);
