//! Sequential vs parallel batch evaluation on a 64-sample batch.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hqtn::aero::*;
use hqtn::encoding::EncodingConfig;
use hqtn::exec::ExecMode;
use hqtn::train::run::supervision;
use hqtn::train::*;

fn batch_eval(c: &mut Criterion) {
    let grid = GridSpec {
        a: Axis::new(-0.4, 0.4, 2),
        mu: Axis::new(10.0, 50.0, 2),
        u_inf: Axis::new(10.0, 210.0, 16),
    };
    let ds = generate_dataset(
        &grid,
        &StructuralConstants::default(),
        0.5,
        201,
        0,
        ExecMode::Parallel,
    )
    .unwrap();
    let data =
        PreparedData::from_dataset(&ds, &EncodingConfig::default(), ExecMode::Parallel).unwrap();
    let cfg = ExperimentConfig::default();
    let fwd = Forward::new(&cfg).unwrap();
    let params = ModelParams::init(&cfg).unwrap();
    let sup = supervision(&cfg, &data, None);
    let samples: Vec<_> = data.samples.iter().collect();
    let batch: Vec<_> = data.samples.iter().zip(&sup).collect();

    let mut g = c.benchmark_group("batch_eval");
    g.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        let name = format!("{mode:?}");
        g.bench_function(BenchmarkId::new("predict", &name), |b| {
            b.iter(|| fwd.predict(&params, &samples, mode).unwrap())
        });
        g.bench_function(BenchmarkId::new("batch_grad", &name), |b| {
            b.iter(|| fwd.batch_grad(&params, &batch, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch_eval);
criterion_main!(benches);
