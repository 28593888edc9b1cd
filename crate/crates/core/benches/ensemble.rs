use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drivenbath::bath::DebyeSpec;
use drivenbath::noise::{Ensemble, Regime};
use drivenbath::specfun::ThermalContext;
use drivenbath::Execution;

fn correlation_matrix(c: &mut Criterion) {
    let bath = DebyeSpec::new(1e13, 5e12, 1.6e-19, 1e-25).unwrap().discretize(64).unwrap();
    let ctx = ThermalContext::kelvin(300.0).unwrap();
    let times: Vec<f64> = (0..16).map(|i| i as f64 * 1e-13).collect();
    let shift = vec![0.0; times.len()];
    let mut group = c.benchmark_group("correlation_matrix");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let ensemble = Ensemble {
            bath: &bath,
            ctx,
            regime: Regime::Classical,
            master_seed: 1,
            realizations: 20_000,
            exec,
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &ensemble, |b, e| {
            b.iter(|| black_box(e.correlation_matrix(black_box(&times), &shift).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, correlation_matrix);
criterion_main!(benches);
