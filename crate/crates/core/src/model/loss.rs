//! Reconstruction and triplet losses, summed over a batch.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

fn check_same_shape(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.dim() != b.dim() {
        let (expected, got) = if a.ncols() != b.ncols() {
            (a.ncols(), b.ncols())
        } else {
            (a.nrows(), b.nrows())
        };
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Squared L2 distance between rows, summed over the batch.
pub fn reconstruction_loss(x_hat: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape(x_hat, target)?;
    let mut sum = 0.0;
    Zip::from(x_hat).and(target).for_each(|&a, &b| sum += (a - b) * (a - b));
    Ok(sum)
}

/// Euclidean distance, `sqrt(max(0, |a - b|^2))`.
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sq.max(0.0).sqrt()
}

/// `sum_i max(0, m + D(a_i, p_i) - D(a_i, n_i))` with Euclidean `D`.
pub fn triplet_loss(
    e_a: ArrayView2<'_, f64>,
    e_p: ArrayView2<'_, f64>,
    e_n: ArrayView2<'_, f64>,
    margin: f64,
) -> Result<f64> {
    check_same_shape(e_a, e_p)?;
    check_same_shape(e_a, e_n)?;
    Ok((0..e_a.nrows())
        .map(|i| {
            let (a, p, n) = (e_a.row(i), e_p.row(i), e_n.row(i));
            (margin + euclidean(a, p) - euclidean(a, n)).max(0.0)
        })
        .sum())
}

/// Triplet loss and its gradient with respect to the three embedding blocks.
///
/// The hinge at exactly zero and the distance at coincident points both take
/// subgradient 0.
pub fn triplet_loss_grad(
    e_a: ArrayView2<'_, f64>,
    e_p: ArrayView2<'_, f64>,
    e_n: ArrayView2<'_, f64>,
    margin: f64,
) -> (f64, Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut ga = Array2::zeros(e_a.raw_dim());
    let mut gp = Array2::zeros(e_p.raw_dim());
    let mut gn = Array2::zeros(e_n.raw_dim());
    let mut loss = 0.0;
    for i in 0..e_a.nrows() {
        let (a, p, n) = (e_a.row(i), e_p.row(i), e_n.row(i));
        let (d_ap, d_an) = (euclidean(a, p), euclidean(a, n));
        let h = margin + d_ap - d_an;
        if h <= 0.0 {
            continue;
        }
        loss += h;
        if d_ap > 0.0 {
            for k in 0..a.len() {
                let u = (a[k] - p[k]) / d_ap;
                ga[[i, k]] += u;
                gp[[i, k]] -= u;
            }
        }
        if d_an > 0.0 {
            for k in 0..a.len() {
                let u = (a[k] - n[k]) / d_an;
                ga[[i, k]] -= u;
                gn[[i, k]] += u;
            }
        }
    }
    (loss, ga, gp, gn)
}
