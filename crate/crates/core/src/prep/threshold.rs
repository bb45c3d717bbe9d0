use nalgebra::DMatrix;

use super::AdjacencyMatrix;
use crate::error::{Error, Result};

/// Number of undirected edges kept at `percent` of the `N(N-1)/2` pairs, floored.
pub fn edge_budget(n_nodes: usize, percent: f64) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Config(format!("threshold percent {percent} outside (0, 100]")));
    }
    let pairs = n_nodes * n_nodes.saturating_sub(1) / 2;
    Ok(((percent * pairs as f64) / 100.0).floor() as usize)
}

/// Keeps the strongest `percent`% of node pairs by absolute correlation and
/// binarizes. Equal strengths are ordered by `(i, j)` ascending.
pub fn threshold_edges(r: &DMatrix<f64>, percent: f64) -> Result<AdjacencyMatrix> {
    if !r.is_square() {
        return Err(Error::dim("threshold_edges", format!("{:?}", r.shape())));
    }
    let n = r.nrows();
    let keep = edge_budget(n, percent)?;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((r[(i, j)].abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let kept: Vec<(usize, usize)> = pairs.iter().take(keep).map(|&(_, i, j)| (i, j)).collect();
    AdjacencyMatrix::from_edges(n, &kept)
}
