use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glavg::experiments::{convergence_study, StudyConfig};
use glavg::rng::path_seed;
use glavg::sim::simulate_pair;
use glavg::{Executor, SystemConfig};

fn system() -> SystemConfig {
    let mut sys = SystemConfig::new(0.02, 0.1).with_modes(16);
    sys.dt = 0.001;
    sys
}

fn pair_ensemble(c: &mut Criterion) {
    let sys = system();
    let mut group = c.benchmark_group("pair_ensemble_32");
    group.sample_size(10);
    for exec in [Executor::Sequential, Executor::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| {
                b.iter(|| {
                    exec.map_indexed(32, |i| {
                        simulate_pair(&sys, path_seed(sys.seed, i as u64)).unwrap()
                    })
                })
            },
        );
    }
    group.finish();
}

fn convergence(c: &mut Criterion) {
    let sys = system();
    let mut group = c.benchmark_group("convergence_8_paths");
    group.sample_size(10);
    for exec in [Executor::Sequential, Executor::Parallel] {
        let mut study = StudyConfig::new(&sys, 8);
        study.executor = exec;
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| convergence_study(&sys, &[0.1, 0.02], &study).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pair_ensemble, convergence);
criterion_main!(benches);
