use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rrg_core::harness::{run_experiment, ExperimentConfig, Statistic};
use rrg_core::parallel::Execution;

fn config(stat: Statistic, n: usize, execution: Execution) -> ExperimentConfig {
    ExperimentConfig { stat, n, d: 2, r: Some(4), trials: 64, seed: 1, execution, ..Default::default() }
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for (stat, n) in [(Statistic::Cnbw, 2000), (Statistic::Cycles, 2000), (Statistic::Lambda2, 150)] {
        for execution in [Execution::Serial, Execution::Parallel] {
            let cfg = config(stat, n, execution);
            group.bench_with_input(BenchmarkId::new(format!("{stat:?}/n={n}"), format!("{execution:?}")), &cfg, |b, cfg| {
                b.iter(|| run_experiment(cfg).expect("benchmark config is valid"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
