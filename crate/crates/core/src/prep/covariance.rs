//! Shrinkage covariance toward a scaled identity, and its correlation matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LedoitWolf {
    pub covariance: DMatrix<f64>,
    /// Weight on the `m·I` target, in `[0, 1]`.
    pub shrinkage: f64,
}

/// Empirical covariance of the columns of a `T × N` matrix, divisor `T`.
pub fn empirical_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.nrows() as f64;
    let centered = centered(x);
    centered.transpose() * &centered / t
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

/// Ledoit-Wolf estimate for a `T × N` observation matrix.
///
/// `Σ* = ρ·m·I + (1-ρ)·S` with `m = tr(S)/N`, `d² = ‖S - mI‖²/N`,
/// `b̄² = Σ_k ‖x_k x_kᵀ - S‖² / (N·T²)`, `ρ = min(b̄², d²) / d²` (and `ρ = 0`
/// when `d² = 0`).
pub fn ledoit_wolf(x: &DMatrix<f64>) -> Result<LedoitWolf> {
    let (t, n) = x.shape();
    if t < 2 {
        return Err(Error::Contract(format!(
            "Ledoit-Wolf needs at least 2 observations, got {t}"
        )));
    }
    if n == 0 {
        return Err(Error::Contract("Ledoit-Wolf needs at least one variable".into()));
    }
    let xc = centered(x);
    let tf = t as f64;
    let nf = n as f64;
    let s = xc.transpose() * &xc / tf;
    let mu = s.trace() / nf;

    let mut d2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { mu } else { 0.0 };
            d2 += (s[(i, j)] - target).powi(2);
        }
    }
    d2 /= nf;

    // Σ_k ‖x_k x_kᵀ - S‖² = Σ_k ‖x_k‖⁴ - T‖S‖²
    let fourth: f64 = xc
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().powi(2))
        .sum();
    let s_norm2: f64 = s.iter().map(|v| v * v).sum();
    let b_bar2 = ((fourth / tf - s_norm2) / (nf * tf)).max(0.0);

    let shrinkage = if d2 == 0.0 { 0.0 } else { b_bar2.min(d2) / d2 };
    let mut covariance = s * (1.0 - shrinkage);
    for i in 0..n {
        covariance[(i, i)] += shrinkage * mu;
    }
    Ok(LedoitWolf {
        covariance,
        shrinkage,
    })
}

/// `r_ij = c_ij / sqrt(c_ii c_jj)` with an exact unit diagonal.
pub fn covariance_to_correlation(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !c.is_square() {
        return Err(Error::dim("covariance_to_correlation", format!("{:?}", c.shape())));
    }
    let n = c.nrows();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let v = c[(i, i)];
        if v.is_nan() || v <= 0.0 {
            return Err(Error::DegenerateVariance { index: i, value: v });
        }
        scale.push(v.sqrt());
    }
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = if i == j {
                1.0
            } else {
                (c[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
            };
        }
    }
    Ok(r)
}
