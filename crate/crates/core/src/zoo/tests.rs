use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffengine::{Adam, Mode, Tape, Tensor};
use crate::prep::{AdjacencyMatrix, GraphSample, Label, SampleWindow};

fn spec(name: &str, length: usize, nodes: usize) -> ModelSpec {
    ModelSpec::from_name(&name.parse().unwrap(), None, 1, length, nodes).unwrap()
}

fn random_sample(rng: &mut ChaCha8Rng, n: usize, t: usize, label: Label) -> GraphSample {
    let features = DMatrix::from_fn(n, t, |_, _| rng.gen_range(-1.0..1.0));
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                pairs.push((i, j));
            }
        }
    }
    GraphSample {
        window: SampleWindow {
            subject_id: "s".into(),
            scan_index: 0,
            window_index: 0,
            label,
            features,
        },
        correlation: DMatrix::identity(n, n),
        adjacency: AdjacencyMatrix::from_edges(n, &pairs).unwrap(),
    }
}

fn batch(samples: &[GraphSample]) -> GraphBatch {
    GraphBatch::from_samples(&samples.iter().collect::<Vec<_>>()).unwrap()
}

/// Output length after four stride-2, kernel-7, padding-3 layers: ceil(T/2) four times.
fn l4(t: usize) -> usize {
    (0..4).fold(t, |l, _| l.div_ceil(2))
}

#[test]
fn table_parameter_counts() {
    assert_eq!(Model::<f32>::build(&spec("mean_CNN", 1200, 50)).unwrap().parameter_count(), 1_248_545);
    assert_eq!(Model::<f32>::build(&spec("mean_CNN_GCN5", 1200, 50)).unwrap().parameter_count(), 1_314_337);
    assert_eq!(Model::<f32>::build(&spec("mean_CNN", 75, 50)).unwrap().parameter_count(), 101_665);
}

#[test]
fn parameter_count_formula_and_gcn_delta() {
    for t in [16, 33, 75, 160, 300, 1200] {
        let base = Model::<f32>::build(&spec("mean_CNN", t, 10)).unwrap().parameter_count();
        let gcn = Model::<f32>::build(&spec("mean_CNN_GCN", t, 10)).unwrap().parameter_count();
        assert_eq!(base, 19_232 + 64 * l4(t) * 256 + 256 + 257, "T={t}");
        assert_eq!(gcn - base, 65_792);
    }
}

#[test]
fn head_has_257_parameters() {
    let m = Model::<f32>::build(&spec("mean_CNN", 75, 5)).unwrap();
    assert_eq!(m.head().param_count(), 257);
}

#[test]
fn variants_have_expected_parts() {
    let m = Model::<f32>::build(&spec("mean_CNN", 32, 8)).unwrap();
    assert!(m.gcn().is_none() && m.diffpool().is_none());
    let m = Model::<f32>::build(&spec("diff5_CNN_GCN", 32, 8)).unwrap();
    assert!(m.gcn().is_some());
    assert_eq!(m.diffpool().unwrap().cluster_sizes(), vec![8, 2, 1]);
}

#[test]
fn same_seed_same_parameters() {
    let s = spec("mean_TCN_GCN5", 64, 6);
    let a = Model::<f32>::build(&s).unwrap();
    let b = Model::<f32>::build(&s).unwrap();
    assert_eq!(a.store().snapshot(), b.store().snapshot());
    let mut s2 = s.clone();
    s2.seed = 1;
    let c = Model::<f32>::build(&s2).unwrap();
    assert_ne!(a.store().snapshot(), c.store().snapshot());
}

#[test]
fn zero_head_gives_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut m = Model::<f64>::build(&spec("mean_CNN_GCN5", 32, 6)).unwrap();
    for id in [m.head().linear.weight, m.head().linear.bias] {
        m.store_mut().get_mut(id).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let samples: Vec<_> = (0..3).map(|_| random_sample(&mut rng, 6, 32, Label::Positive)).collect();
    for p in m.predict(&batch(&samples)).unwrap() {
        assert_eq!(p, 0.5);
    }
}

#[test]
fn eval_output_does_not_depend_on_batch_company() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in ["mean_CNN_GCN5", "diff5_CNN", "mean_TCN"] {
        let mut m = Model::<f64>::build(&spec(name, 32, 9)).unwrap();
        let samples: Vec<_> = (0..4).map(|_| random_sample(&mut rng, 9, 32, Label::Negative)).collect();
        let all = m.predict(&batch(&samples)).unwrap();
        for (i, s) in samples.iter().enumerate() {
            let one = m.predict(&batch(std::slice::from_ref(s))).unwrap();
            assert!((one[0] - all[i]).abs() < 1e-12, "{name}");
            assert!(one[0] > 0.0 && one[0] < 1.0);
        }
    }
}

#[test]
fn node_permutation_leaves_mean_models_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 7;
    let mut m = Model::<f64>::build(&spec("mean_CNN_GCN5", 32, n)).unwrap();
    let s = random_sample(&mut rng, n, 32, Label::Positive);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.reverse();
    perm.swap(0, 3);
    let mut p = s.clone();
    for (i, &to) in perm.iter().enumerate() {
        p.window.features.set_row(to, &s.window.features.row(i));
    }
    p.adjacency = s.adjacency.permuted(&perm);
    let a = m.predict(&batch(&[s])).unwrap()[0];
    let b = m.predict(&batch(&[p])).unwrap()[0];
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn mixed_shapes_are_a_batch_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_sample(&mut rng, 4, 32, Label::Positive);
    let b = random_sample(&mut rng, 5, 32, Label::Positive);
    assert!(matches!(GraphBatch::from_samples(&[&a, &b]), Err(crate::Error::Batch(_))));
    let mut m = Model::<f32>::build(&spec("mean_CNN", 32, 5)).unwrap();
    assert!(matches!(m.predict(&batch(&[a])), Err(crate::Error::Batch(_))));
}

#[test]
fn training_reduces_loss_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = Model::<f32>::build(&spec("mean_CNN", 32, 4)).unwrap();
    let samples: Vec<_> = (0..8)
        .map(|i| random_sample(&mut rng, 4, 32, if i % 2 == 0 { Label::Positive } else { Label::Negative }))
        .collect();
    let b = batch(&samples);
    let mut adam = Adam::new(1e-3, 0.0);
    let first = m.train_step(&mut adam, &b, 0).unwrap().loss;
    let mut last = first;
    for step in 1..30 {
        last = m.train_step(&mut adam, &b, step).unwrap().loss;
    }
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn diffpool_step_reports_aux_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut m = Model::<f32>::build(&spec("diff5_CNN", 32, 8)).unwrap();
    let samples: Vec<_> = (0..4).map(|_| random_sample(&mut rng, 8, 32, Label::Positive)).collect();
    let stats = m.train_step(&mut Adam::new(1e-3, 0.0), &batch(&samples), 0).unwrap();
    assert!(stats.link_loss.unwrap() >= 0.0);
    assert!(stats.entropy.unwrap() >= 0.0);
    assert_eq!(stats.loss, stats.bce);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = Model::<f32>::build(&spec("diff5_TCN_GCN", 32, 6)).unwrap();
    let samples: Vec<_> = (0..4).map(|_| random_sample(&mut rng, 6, 32, Label::Negative)).collect();
    m.train_step(&mut Adam::new(1e-2, 0.0), &batch(&samples), 0).unwrap();
    let bytes = encode_checkpoint(&m).unwrap();
    let back: Model<f32> = decode_checkpoint(&bytes, std::path::Path::new("mem")).unwrap();
    assert_eq!(back.spec(), m.spec());
    for ((_, a), (_, b)) in m.store().iter().zip(back.store().iter()) {
        assert_eq!(a.name, b.name);
        let bits_a: Vec<u32> = a.value.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = b.value.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b, "{}", a.name);
    }
    assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let m = Model::<f32>::build(&spec("mean_CNN", 32, 3)).unwrap();
    let bytes = encode_checkpoint(&m).unwrap();
    let p = std::path::Path::new("mem");
    assert!(decode_checkpoint::<f32>(&bytes[..bytes.len() - 1], p).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_checkpoint::<f32>(&bad, p).is_err());
    let mut extra = bytes;
    extra.push(0);
    assert!(decode_checkpoint::<f32>(&extra, p).is_err());
}

#[test]
fn bce_through_the_head_matches_hand_value() {
    let mut tape = Tape::<f64>::new(Mode::Eval, 0);
    let p = tape.constant(Tensor::from_vec(vec![0.5]));
    let l = tape.bce_loss(p, &[1.0]).unwrap();
    assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-15);
}
