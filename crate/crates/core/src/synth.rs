//! Labeled synthetic node timeseries with a controllable class signal.
//!
//! Every node follows an AR(1) process with coefficient 0.3 and unit-variance
//! Gaussian innovations. Positive subjects additionally carry, on a fixed
//! subset of 20% of the nodes:
//! * covariance signal: a shared latent AR(1) series (coefficient 0.9, unit
//!   variance) scaled by the effect size and added to every subset node;
//! * spectral signal: the AR coefficient raised by `0.3 * effect_size`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::derive_seed;
use crate::prep::io::{write_manifest, write_matrix, Manifest, ManifestSubject, MatrixFormat, MANIFEST_VERSION};
use crate::prep::{Label, SubjectRecord};

pub const BASE_AR: f64 = 0.3;
pub const LATENT_AR: f64 = 0.9;
pub const SPECTRAL_SHIFT: f64 = 0.3;
pub const SIGNAL_FRACTION: f64 = 0.2;
pub const MIN_SESSION_LENGTH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Covariance,
    Spectral,
    Both,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariance" => Ok(SignalKind::Covariance),
            "spectral" => Ok(SignalKind::Spectral),
            "both" => Ok(SignalKind::Both),
            _ => Err(Error::Config(format!("unknown signal kind `{s}` (covariance|spectral|both)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub n_sessions: usize,
    pub session_length: usize,
    pub effect_size: f64,
    pub signal: SignalKind,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 40,
            n_nodes: 20,
            n_sessions: 4,
            session_length: 160,
            effect_size: 1.0,
            signal: SignalKind::Covariance,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 || !self.n_subjects.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "need an even number of at least 2 subjects, got {}",
                self.n_subjects
            )));
        }
        if self.n_nodes < 2 {
            return Err(Error::Config(format!("need at least 2 nodes, got {}", self.n_nodes)));
        }
        if self.n_sessions == 0 {
            return Err(Error::Config("need at least one session".into()));
        }
        if self.session_length < MIN_SESSION_LENGTH {
            return Err(Error::Config(format!(
                "session length must be at least {MIN_SESSION_LENGTH}, got {}",
                self.session_length
            )));
        }
        if !(0.0..=1.0).contains(&self.effect_size) {
            return Err(Error::Config(format!("effect size must lie in [0, 1], got {}", self.effect_size)));
        }
        Ok(())
    }

    fn covariance(&self) -> bool {
        matches!(self.signal, SignalKind::Covariance | SignalKind::Both)
    }

    fn spectral(&self) -> bool {
        matches!(self.signal, SignalKind::Spectral | SignalKind::Both)
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub config: SynthConfig,
    /// Sorted indices of the nodes carrying the class signal.
    pub signal_nodes: Vec<usize>,
    pub records: Vec<SubjectRecord>,
}

pub fn subject_id(index: usize) -> String {
    format!("sub-{index:04}")
}

/// Nodes carrying the signal: `round(0.2 N)` (at least one), drawn from the seed.
pub fn signal_nodes(n_nodes: usize, seed: u64) -> Vec<usize> {
    let k = ((n_nodes as f64 * SIGNAL_FRACTION).round() as usize).clamp(1, n_nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX, u64::MAX));
    let mut nodes = sample(&mut rng, n_nodes, k).into_vec();
    nodes.sort_unstable();
    nodes
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// AR(1) series started from its stationary distribution.
fn ar1(rng: &mut ChaCha8Rng, phi: f64, innovation_sd: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut x = normal(rng) * innovation_sd / (1.0 - phi * phi).sqrt();
    out.push(x);
    for _ in 1..len {
        x = phi * x + innovation_sd * normal(rng);
        out.push(x);
    }
    out
}

fn session(cfg: &SynthConfig, positive: bool, subset: &[bool], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let t = cfg.session_length;
    let mut m = DMatrix::zeros(t, cfg.n_nodes);
    for j in 0..cfg.n_nodes {
        let signal = positive && subset[j];
        let phi = if signal && cfg.spectral() {
            BASE_AR + SPECTRAL_SHIFT * cfg.effect_size
        } else {
            BASE_AR
        };
        for (i, v) in ar1(rng, phi, 1.0, t).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    if positive && cfg.covariance() {
        let latent = ar1(rng, LATENT_AR, (1.0 - LATENT_AR * LATENT_AR).sqrt(), t);
        for j in (0..cfg.n_nodes).filter(|&j| subset[j]) {
            for (i, z) in latent.iter().enumerate() {
                m[(i, j)] += cfg.effect_size * z;
            }
        }
    }
    // stored at single precision, so keep the in-memory copy identical to disk
    m.map(|v| v as f32 as f64)
}

/// Generates `n_subjects` subjects, alternating labels (even index negative).
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let nodes = signal_nodes(cfg.n_nodes, cfg.seed);
    let mut subset = vec![false; cfg.n_nodes];
    nodes.iter().for_each(|&j| subset[j] = true);
    let records = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| {
            let label = if i % 2 == 1 { Label::Positive } else { Label::Negative };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64, 0));
            let sessions = (0..cfg.n_sessions)
                .map(|_| session(cfg, label == Label::Positive, &subset, &mut rng))
                .collect();
            SubjectRecord {
                subject_id: subject_id(i),
                label,
                sessions,
            }
        })
        .collect();
    Ok(SynthDataset {
        config: cfg.clone(),
        signal_nodes: nodes,
        records,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one matrix file per session plus `manifest.json` into `dir`;
/// returns the manifest path.
pub fn write_dataset(dir: &Path, data: &SynthDataset, format: MatrixFormat) -> Result<PathBuf> {
    let mut subjects = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let mut sessions = Vec::with_capacity(r.sessions.len());
        for (s, m) in r.sessions.iter().enumerate() {
            let rel = PathBuf::from(format!("{}_ses-{s}.{}", r.subject_id, format.extension()));
            write_matrix(&dir.join(&rel), m, format)?;
            sessions.push(rel);
        }
        subjects.push(ManifestSubject {
            id: r.subject_id.clone(),
            label: r.label as u8,
            sessions,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        n_nodes: data.config.n_nodes,
        subjects,
    };
    let path = dir.join(MANIFEST_FILE);
    write_manifest(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::io::load_records;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 6,
            n_nodes: 5,
            n_sessions: 2,
            session_length: 40,
            effect_size: 1.0,
            signal: SignalKind::Both,
            seed: 11,
        }
    }

    #[test]
    fn shapes_and_balance() {
        let d = generate(&small()).unwrap();
        assert_eq!(d.records.len(), 6);
        assert_eq!(d.records.iter().filter(|r| r.label == Label::Positive).count(), 3);
        assert!(d.records.iter().all(|r| r.sessions.len() == 2 && r.sessions[0].shape() == (40, 5)));
        assert_eq!(d.signal_nodes.len(), 1);
        assert_eq!(signal_nodes(20, 7).len(), 4);
        assert_eq!(signal_nodes(50, 7).len(), 10);
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.records, b.records);
        let mut other = small();
        other.seed = 12;
        assert_ne!(generate(&other).unwrap().records, a.records);
    }

    #[test]
    fn invalid_configs() {
        for f in [
            |c: &mut SynthConfig| c.n_subjects = 5,
            |c: &mut SynthConfig| c.n_nodes = 1,
            |c: &mut SynthConfig| c.session_length = 31,
            |c: &mut SynthConfig| c.effect_size = 1.5,
            |c: &mut SynthConfig| c.n_sessions = 0,
        ] {
            let mut c = small();
            f(&mut c);
            assert!(matches!(generate(&c), Err(Error::Config(_))));
        }
    }

    #[test]
    fn files_round_trip() {
        let d = generate(&small()).unwrap();
        for format in [MatrixFormat::Binary, MatrixFormat::Csv] {
            let dir = tempfile::tempdir().unwrap();
            let manifest = write_dataset(dir.path(), &d, format).unwrap();
            assert_eq!(load_records(&manifest).unwrap(), d.records);
        }
    }

    #[test]
    fn latent_signal_correlates_subset_nodes() {
        let cfg = SynthConfig {
            n_subjects: 2,
            n_nodes: 10,
            n_sessions: 1,
            session_length: 4000,
            effect_size: 1.0,
            signal: SignalKind::Covariance,
            seed: 3,
        };
        let d = generate(&cfg).unwrap();
        let (a, b) = (d.signal_nodes[0], d.signal_nodes[1]);
        let corr = |m: &DMatrix<f64>| {
            let x = m.column(a);
            let y = m.column(b);
            let (mx, my) = (x.mean(), y.mean());
            let cov: f64 = x.iter().zip(y.iter()).map(|(p, q)| (p - mx) * (q - my)).sum();
            let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
            let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
            cov / (vx * vy).sqrt()
        };
        // unit latent variance against roughly 1.1 node variance: r near 0.48
        let pos = corr(&d.records[1].sessions[0]);
        let neg = corr(&d.records[0].sessions[0]);
        assert!(pos > 0.35, "{pos}");
        assert!(neg.abs() < 0.1, "{neg}");
    }
}
