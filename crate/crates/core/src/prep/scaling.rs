use crate::error::{Error, Result};

/// Quantile of sorted data with linear interpolation between order statistics
/// (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Median, first and third quartile.
pub fn robust_stats(series: &[f64]) -> Result<(f64, f64, f64)> {
    if series.is_empty() {
        return Err(Error::Contract("robust scaling of an empty series".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.75),
    ))
}

/// `(x - median) / (Q3 - Q1)`; a zero interquartile range maps to all zeros.
pub fn robust_scale(series: &[f64]) -> Result<Vec<f64>> {
    let (median, q1, q3) = robust_stats(series)?;
    let iqr = q3 - q1;
    if iqr == 0.0 {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|&x| (x - median) / iqr).collect())
}
