use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maxent_qst::reconstruct::{reconstruct_complex, reconstruct_real, ReconstructConfig, Reference};
use maxent_qst::simulate::{exact_measurements, random_circuit, run, sampled_measurements, Measure};
use maxent_qst::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn config(execution: Execution, record_trace: bool) -> ReconstructConfig {
    ReconstructConfig {
        reference: Reference::Auto,
        record_trace,
        execution,
        ..ReconstructConfig::default()
    }
}

fn pair_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct_real");
    group.sample_size(10);
    for n in [4, 6, 8] {
        let sv = run(&random_circuit(n, 2 * n, 1).unwrap()).unwrap();
        let ms = exact_measurements(&sv, Measure::Probabilities).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &ms, |b, ms| {
                b.iter(|| reconstruct_real(ms, &config(exec, false)).unwrap())
            });
        }
    }
    group.finish();
}

fn complex_workflow(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct_complex");
    group.sample_size(10);
    for n in [4, 6, 8] {
        let sv = run(&random_circuit(n, 2 * n, 2).unwrap()).unwrap();
        let ms = exact_measurements(&sv, Measure::FirstRow(0)).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &ms, |b, ms| {
                b.iter(|| reconstruct_complex(ms, &ReconstructConfig { reference: Reference::First, ..config(exec, false) }).unwrap())
            });
        }
    }
    group.finish();
}

fn convergence_trace(c: &mut Criterion) {
    let mut group = c.benchmark_group("convergence_trace");
    group.sample_size(10);
    for n in [4, 5] {
        let sv = run(&random_circuit(n, 2 * n, 3).unwrap()).unwrap();
        let ms = exact_measurements(&sv, Measure::Probabilities).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &ms, |b, ms| {
                b.iter(|| reconstruct_real(ms, &config(exec, true)).unwrap())
            });
        }
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampled_measurements");
    group.sample_size(10);
    for n in [3, 4] {
        let sv = run(&random_circuit(n, 2 * n, 4).unwrap()).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &sv, |b, sv| {
                b.iter(|| sampled_measurements(sv, Measure::FirstRow(0), 4096, 7, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pair_solves, complex_workflow, convergence_trace, sampling);
criterion_main!(benches);
