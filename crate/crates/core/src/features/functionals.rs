use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Statistics computed per descriptor column, in storage order.
pub const FUNCTIONALS: [&str; 6] = ["p1", "p99", "range", "mean", "median", "std"];

/// Percentile of ascending-sorted data, interpolating linearly between order
/// statistics at rank `q / 100 * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Six functionals of one column: 1st percentile, 99th percentile, their
/// range, mean, median and population standard deviation.
pub fn column_functionals(values: &[f64]) -> Result<[f64; 6]> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty window".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in functional window".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p1 = percentile_sorted(&sorted, 1.0);
    let p99 = percentile_sorted(&sorted, 99.0);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok([p1, p99, p99 - p1, mean, percentile_sorted(&sorted, 50.0), var.sqrt()])
}

/// Functionals of every column of `window`, functional-major: entry
/// `f * n_cols + c` holds functional `f` of column `c`.
pub fn compute_functionals(window: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let (rows, cols) = window.dim();
    if rows < 2 {
        return Err(Error::InvalidInput(format!(
            "functional window needs >= 2 rows, got {rows}"
        )));
    }
    let mut out = vec![0.0; FUNCTIONALS.len() * cols];
    let mut column = Vec::with_capacity(rows);
    for c in 0..cols {
        column.clear();
        column.extend(window.column(c).iter().copied());
        for (f, v) in column_functionals(&column)?.into_iter().enumerate() {
            out[f * cols + c] = v;
        }
    }
    Ok(out)
}

/// Names for the functional-major layout over the given descriptor names.
pub fn functional_names(lld_names: &[String]) -> Vec<String> {
    FUNCTIONALS
        .iter()
        .flat_map(|f| lld_names.iter().map(move |n| format!("{f}__{n}")))
        .collect()
}
