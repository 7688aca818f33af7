use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use perclab::algorithms::{measure_stability, Majority};
use perclab::coupling::conditional_feasibility_mc;
use perclab::enumerate::{classify_isolation_with, enumerate_solutions_with, IsolationMethod};
use perclab::partition::{pitt_check, random_pitt_setup};
use perclab::{ConstraintSpec, DisorderInstance, Execution, SpinConfig};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn enumeration(c: &mut Criterion) {
    let g = DisorderInstance::sample(20, 12, 1, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
    let s = enumerate_solutions_with(&g, Execution::Sequential).unwrap();
    let mut group = c.benchmark_group("enumerate_n20");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::new("solutions", name), |b| {
            b.iter(|| enumerate_solutions_with(black_box(&g), exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("isolation_k2", name), |b| {
            b.iter(|| classify_isolation_with(black_box(&s), 2, IsolationMethod::Auto, exec).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let g = DisorderInstance::sample(16, 6, 2, ConstraintSpec::half_space(0.0).unwrap()).unwrap();
    let tau = SpinConfig::all_plus(16).unwrap();
    let setup = random_pitt_setup(3).unwrap();
    let spec = ConstraintSpec::half_space(0.0).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::new("conditional_feasibility_20k", name), |b| {
            b.iter(|| conditional_feasibility_mc(black_box(&g), &tau, 0.1, 20_000, 4, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("pitt_50k", name), |b| {
            b.iter(|| pitt_check(&setup.cov, &setup.mean, &setup.f, &setup.g, 50_000, 5, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("stability_majority_2k", name), |b| {
            b.iter(|| measure_stability(&Majority, 16, 8, &spec, 0.05, 2_000, 6, None, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, enumeration, monte_carlo);
criterion_main!(benches);
