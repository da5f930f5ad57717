use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use avgopt::chains::{token_chain, BoxedChain};
use avgopt::diagnostics::{estimate_diam_decay, mixing_floor_estimate};
use avgopt::graph::Topology;
use avgopt::Execution;

fn token_c5(k: u64) -> avgopt::Result<BoxedChain> {
    Ok(Box::new(token_chain(&Topology::cycle(5)?, k)?))
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn decay(c: &mut Criterion) {
    let mut group = c.benchmark_group("diam_decay_token_c5");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| estimate_diam_decay(token_c5, 300, 200, exec).unwrap())
        });
    }
    group.finish();
}

fn floor(c: &mut Criterion) {
    let mut group = c.benchmark_group("mixing_floor_token_c5");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mixing_floor_estimate(token_c5, 5, 0.01, 0.005, 0, 200, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, decay, floor);
criterion_main!(benches);
