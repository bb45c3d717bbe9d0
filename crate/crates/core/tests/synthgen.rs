use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

use stgraph_core::prep::Label;
use stgraph_core::synth::{generate, SignalKind, SynthConfig};

/// Two-sided Welch t-test p-value.
fn welch_p(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (a.variance() / na, b.variance() / nb);
    let t = (a.mean() - b.mean()) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

fn correlation(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (x.column(i), x.column(j));
    let (ma, mb) = (a.mean(), b.mean());
    let cov: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum();
    let na: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
    let nb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
    cov / (na * nb).sqrt()
}

fn lag1(x: &DMatrix<f64>, j: usize) -> f64 {
    let c = x.column(j);
    let m = c.mean();
    let num: f64 = (1..c.len()).map(|t| (c[t] - m) * (c[t - 1] - m)).sum();
    let den: f64 = c.iter().map(|v| (v - m).powi(2)).sum();
    num / den
}

/// Per-subject mean correlation among signal nodes and mean lag-1
/// autocorrelation of signal nodes, split by class.
fn statistics(cfg: &SynthConfig) -> [(Vec<f64>, Vec<f64>); 2] {
    let data = generate(cfg).unwrap();
    let nodes = &data.signal_nodes;
    let mut out: [(Vec<f64>, Vec<f64>); 2] = Default::default();
    for rec in &data.records {
        let mut corr = Vec::new();
        let mut ac = Vec::new();
        for s in &rec.sessions {
            for (a, &i) in nodes.iter().enumerate() {
                ac.push(lag1(s, i));
                for &j in &nodes[a + 1..] {
                    corr.push(correlation(s, i, j));
                }
            }
        }
        for (slot, v) in out.iter_mut().zip([corr.mean(), ac.mean()]) {
            if rec.label == Label::Positive {
                slot.0.push(v);
            } else {
                slot.1.push(v);
            }
        }
    }
    out
}

#[test]
fn zero_effect_classes_are_indistinguishable() {
    for signal in [SignalKind::Covariance, SignalKind::Spectral, SignalKind::Both] {
        let mut pooled: [(Vec<f64>, Vec<f64>); 2] = Default::default();
        for seed in 0..20 {
            let cfg = SynthConfig { effect_size: 0.0, signal, seed, ..SynthConfig::default() };
            for (acc, (pos, neg)) in pooled.iter_mut().zip(statistics(&cfg)) {
                acc.0.extend(pos);
                acc.1.extend(neg);
            }
        }
        for (name, (pos, neg)) in ["correlation", "autocorrelation"].iter().zip(&pooled) {
            let p = welch_p(pos, neg);
            assert!(p > 0.01, "{signal:?} {name}: p = {p}");
        }
    }
}

#[test]
fn full_effect_separates_the_matching_statistic() {
    for (signal, stat) in [(SignalKind::Covariance, 0), (SignalKind::Spectral, 1)] {
        for seed in 0..3 {
            let cfg = SynthConfig { effect_size: 1.0, signal, seed, ..SynthConfig::default() };
            let stats = statistics(&cfg);
            let (pos, neg) = &stats[stat];
            assert!(welch_p(pos, neg) < 1e-6);
            assert!(pos.clone().mean() > neg.clone().mean());
        }
    }
}

#[test]
fn same_seed_same_data() {
    let cfg = SynthConfig { n_subjects: 4, seed: 3, ..SynthConfig::default() };
    let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
    assert_eq!(a.records, b.records);
    let other = generate(&SynthConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.records[0].sessions, other.records[0].sessions);
}
