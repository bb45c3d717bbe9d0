//! From raw per-subject node timeseries to windowed, scaled graph samples.

mod balance;
mod covariance;
pub mod io;
mod pipeline;
mod scaling;
mod threshold;
mod windows;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use balance::balance_by_subject;
pub use covariance::{covariance_to_correlation, empirical_covariance, ledoit_wolf, LedoitWolf};
pub use pipeline::{prepare_samples, PrepConfig, ADJACENCY_SOURCE};
pub use scaling::{quantile_sorted, robust_scale, robust_stats};
pub use threshold::{edge_budget, threshold_edges};
pub use windows::{window_ranges, window_split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative = 0,
    Positive = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }
}

/// All scans of one subject. Each session is `T_raw × N` (rows are timesteps).
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub label: Label,
    pub sessions: Vec<DMatrix<f64>>,
}

impl SubjectRecord {
    pub fn n_nodes(&self) -> Option<usize> {
        self.sessions.first().map(|s| s.ncols())
    }
}

/// One training sample: an `N × T` robust-scaled feature matrix.
#[derive(Clone, Debug)]
pub struct SampleWindow {
    pub subject_id: String,
    pub scan_index: usize,
    pub window_index: usize,
    pub label: Label,
    pub features: DMatrix<f64>,
}

/// Binary undirected graph, stored densely and as an upper-triangle edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    dense: Vec<u8>,
    edges: Vec<(usize, usize)>,
}

impl AdjacencyMatrix {
    /// Builds from undirected pairs; `(i, j)` and `(j, i)` name the same edge.
    pub fn from_edges(n: usize, pairs: &[(usize, usize)]) -> crate::Result<Self> {
        let mut dense = vec![0u8; n * n];
        for &(i, j) in pairs {
            if i >= n || j >= n || i == j {
                return Err(crate::Error::Contract(format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            dense[i * n + j] = 1;
            dense[j * n + i] = 1;
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if dense[i * n + j] == 1 {
                    edges.push((i, j));
                }
            }
        }
        Ok(AdjacencyMatrix { n, dense, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.dense[i * self.n + j] == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.dense[i * self.n..(i + 1) * self.n].iter().map(|&v| v as usize).sum()
    }

    /// Undirected edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `2 × E` index form: first row sources, second row targets.
    pub fn edge_index(&self) -> [Vec<usize>; 2] {
        [
            self.edges.iter().map(|e| e.0).collect(),
            self.edges.iter().map(|e| e.1).collect(),
        ]
    }

    pub fn to_dense_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.dense[i * self.n + j] as f64)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.dense[i * self.n + j] == self.dense[j * self.n + i]))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.dense[i * self.n + i] == 0)
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pairs: Vec<_> = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::from_edges(self.n, &pairs).expect("permutation of a valid graph")
    }
}

/// A window joined with its correlation matrix and thresholded graph.
#[derive(Clone, Debug)]
pub struct GraphSample {
    pub window: SampleWindow,
    pub correlation: DMatrix<f64>,
    pub adjacency: AdjacencyMatrix,
}

impl GraphSample {
    pub fn n_nodes(&self) -> usize {
        self.window.features.nrows()
    }

    pub fn length(&self) -> usize {
        self.window.features.ncols()
    }

    pub fn label(&self) -> Label {
        self.window.label
    }
}
