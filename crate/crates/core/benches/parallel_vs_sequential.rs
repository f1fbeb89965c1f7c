use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use din::dataio::SyntheticOptions;
use din::exec::Execution;
use din::experiment::{run_experiment, ExperimentConfig};
use din::network::{build_topology, train_network, TrainConfig};
use din::quantizer::{fit_dataset, quantize_dataset, QuantizerConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn synthetic_config(rows: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.dataset.synthetic = Some(SyntheticOptions {
        rows,
        ..Default::default()
    });
    config.split.n_train = rows / 2;
    config
}

fn bench_training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_network");
    for rows in [400usize, 4000] {
        let config = synthetic_config(rows);
        let raw = config.dataset.load().unwrap();
        let specs = fit_dataset(&raw, &QuantizerConfig::default()).unwrap();
        let data = quantize_dataset(&raw, &specs).unwrap();
        let topology = build_topology(24, &[3; 4], 2, &data.cardinalities).unwrap();
        for (name, execution) in MODES {
            let train = TrainConfig {
                execution,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, rows), &rows, |b, _| {
                b.iter(|| train_network(&data, &topology, &train).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    let mut config = synthetic_config(400);
    config.runs = 64;
    let raw = config.dataset.load().unwrap();
    for (name, execution) in MODES {
        config.execution = execution;
        group.bench_function(BenchmarkId::new(name, config.runs), |b| {
            b.iter(|| run_experiment(&config, &raw, |_| {}).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_training, bench_experiment);
criterion_main!(benches);
