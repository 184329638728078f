//! Rayon fan-out versus the sequential fallback on the three batch hot
//! paths: per-graph gradients, forward-only evaluation, and dataset
//! encoding. Both modes produce bit-identical outputs, so the question
//! each group answers is purely how the wall clock scales with the
//! thread pool on this machine.
//!
//! Run with `cargo bench -p entangle` (requires the default `parallel`
//! feature).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use entangle::dataset::split_dataset;
use entangle::encoder::EncoderKind;
use entangle::encoding::rw_diag_encoding;
use entangle::generate::multiplicative_task;
use entangle::model::{init_model, Readout, Task};
use entangle::mpnn::{LayerKind, Regime};
use entangle::parallel::{map_collect, ExecMode};
use entangle::train::{batch_gradient, split_metric, TrainData};
use entangle::{Graph, ModelConfig, ModelParams};

const GRAPHS: usize = 64;
const NODES: usize = 20;

fn fixture() -> (Vec<Graph>, ModelParams) {
    let (graphs, _) = multiplicative_task(GRAPHS, NODES, 0.3, 4, 8, 99).expect("dataset");
    let cfg = ModelConfig {
        encoder: EncoderKind::Tensor,
        joint: true,
        mlp_depth: 1,
        d_in: 4,
        k: 8,
        d_hidden: 16,
        layer: LayerKind::Sage,
        regime: Regime::Full,
        layers: 2,
        epsilon: 0.0,
        decoder_hidden: 16,
        readout: Readout::Sum,
        task: Task::Regression { dim: 1 },
        seed: 99,
    };
    (graphs, init_model(&cfg).expect("model"))
}

fn modes() -> [(&'static str, ExecMode); 2] {
    [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)]
}

fn bench_batch_gradient(c: &mut Criterion) {
    let (graphs, params) = fixture();
    let encodings: Vec<_> =
        graphs.iter().map(|g| rw_diag_encoding(&g.adjacency(), 8)).collect();
    let splits = split_dataset(GRAPHS, 0.0, 0.0).expect("splits");
    let data = TrainData { graphs: &graphs, encodings: &encodings, splits };

    let mut group = c.benchmark_group("batch_gradient");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| {
                let (loss, grads) =
                    batch_gradient(&params, &data, &(0..GRAPHS), mode).expect("gradient");
                black_box((loss, grads))
            })
        });
    }
    group.finish();
}

fn bench_split_metric(c: &mut Criterion) {
    let (graphs, params) = fixture();
    let encodings: Vec<_> =
        graphs.iter().map(|g| rw_diag_encoding(&g.adjacency(), 8)).collect();
    let splits = split_dataset(GRAPHS, 0.0, 0.0).expect("splits");
    let data = TrainData { graphs: &graphs, encodings: &encodings, splits };

    let mut group = c.benchmark_group("split_metric");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| black_box(split_metric(&params, &data, &(0..GRAPHS), mode).expect("mae")))
        });
    }
    group.finish();
}

fn bench_encode_dataset(c: &mut Criterion) {
    let (graphs, _) = fixture();

    let mut group = c.benchmark_group("encode_dataset");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| {
                black_box(map_collect(mode, &graphs, |g| rw_diag_encoding(&g.adjacency(), 16)))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch_gradient, bench_split_metric, bench_encode_dataset);
criterion_main!(benches);
