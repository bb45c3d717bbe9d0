use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stgraph_core::diffengine::Conv1dGeometry;
use stgraph_core::harness::auc;
use stgraph_core::prep::{covariance_to_correlation, ledoit_wolf, threshold_edges};
use stgraph_core::{Mode, Tape, Tensor};

fn conv1d(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("conv1d_fwd_bwd");
    // first encoder layer over a batch of node series
    for len in [160usize, 1200] {
        let x = Tensor::<f32>::from_fn(&[64, 1, len], |_| rng.gen_range(-1.0..1.0));
        let w = Tensor::<f32>::from_fn(&[8, 1, 7], |_| rng.gen_range(-0.1..0.1));
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| {
            b.iter(|| {
                let mut tape = Tape::new(Mode::Train, 0);
                let xv = tape.constant(x.clone());
                let wv = tape.leaf(w.clone());
                let y = tape.conv1d(xv, wv, None, Conv1dGeometry::symmetric(2, 3, 1)).unwrap();
                let loss = tape.sum_squares(y);
                tape.backward(loss).unwrap()
            })
        });
    }
    group.finish();
}

fn correlation_graph(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = DMatrix::from_fn(300, 50, |_, _| rng.gen_range(-1.0..1.0));
    c.bench_function("ledoit_wolf_threshold_50x300", |b| {
        b.iter(|| {
            let lw = ledoit_wolf(&x).unwrap();
            let r = covariance_to_correlation(&lw.covariance).unwrap();
            threshold_edges(&r, 5.0).unwrap()
        })
    });
}

fn roc_auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..10_000).map(|i| i % 3 == 0).collect();
    c.bench_function("auc_10k", |b| b.iter(|| auc(&scores, &labels).unwrap()));
}

criterion_group!(benches, conv1d, correlation_graph, roc_auc);
criterion_main!(benches);
