use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ffdrive::runner::sweep_truncation;
use ffdrive::scenario::builtin;
use ffdrive::Execution;

const PATHS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn design(c: &mut Criterion) {
    let mut group = c.benchmark_group("design");
    group.sample_size(10);
    for name in ["ground-to-excited", "split-5"] {
        let problem = builtin(name).unwrap().problem().unwrap();
        for (label, exec) in PATHS {
            group.bench_with_input(BenchmarkId::new(label, name), &exec, |b, &exec| {
                b.iter(|| problem.design(exec).unwrap())
            });
        }
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let scenario = builtin("expansion").unwrap();
    let levels = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    for (label, exec) in PATHS {
        group.bench_function(label, |b| b.iter(|| sweep_truncation(&scenario, &levels, None, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, design, sweep);
criterion_main!(benches);
