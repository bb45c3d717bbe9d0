use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stgraph_core::zoo::{GraphBatch, Model, ModelName, ModelSpec};
use stgraph_core::Adam;

fn batch(n_graphs: usize, n: usize, t: usize) -> GraphBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut adjacency = vec![0.0; n_graphs * n * n];
    for g in 0..n_graphs {
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.1) {
                    adjacency[g * n * n + i * n + j] = 1.0;
                    adjacency[g * n * n + j * n + i] = 1.0;
                }
            }
        }
    }
    GraphBatch {
        n_graphs,
        n_nodes: n,
        length: t,
        features: (0..n_graphs * n * t).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        adjacency,
        labels: (0..n_graphs).map(|g| (g % 2) as f64).collect(),
    }
}

fn train_step(c: &mut Criterion) {
    let b = batch(16, 20, 80);
    let mut group = c.benchmark_group("train_step_16x20x80");
    group.sample_size(20);
    for name in ["mean_CNN", "mean_CNN_GCN5", "mean_TCN", "diff5_CNN"] {
        let parsed: ModelName = name.parse().unwrap();
        let spec = ModelSpec::from_name(&parsed, None, 4, 80, 20).unwrap();
        let mut model = Model::<f32>::build(&spec).unwrap();
        let mut adam = Adam::new(1e-3, 0.0);
        group.bench_function(name, |bench| bench.iter(|| model.train_step(&mut adam, &b, 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, train_step);
criterion_main!(benches);
