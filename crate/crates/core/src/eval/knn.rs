//! Exhaustive nearest-neighbor search in double precision.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(query: ArrayView1<'_, f64>, refs: ArrayView2<'_, f64>) -> Result<()> {
    if refs.nrows() == 0 {
        return Err(Error::EmptyReferences("no reference frames".into()));
    }
    if refs.ncols() != query.len() {
        return Err(Error::DimensionMismatch {
            expected: refs.ncols(),
            got: query.len(),
        });
    }
    Ok(())
}

/// Index of the Euclidean-nearest reference row. Equal distances resolve to
/// the lowest index.
pub fn nearest(query: ArrayView1<'_, f64>, refs: ArrayView2<'_, f64>) -> Result<usize> {
    check(query, refs)?;
    let mut best = (f64::INFINITY, 0);
    for (i, r) in refs.outer_iter().enumerate() {
        let d = squared_distance(query, r);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

/// 1-NN label of `query`.
pub fn knn_label(query: ArrayView1<'_, f64>, refs: ArrayView2<'_, f64>, labels: &[u8]) -> Result<u8> {
    if labels.len() != refs.nrows() {
        return Err(Error::DimensionMismatch {
            expected: refs.nrows(),
            got: labels.len(),
        });
    }
    Ok(labels[nearest(query, refs)?])
}

/// Indices of the `n` nearest references, ordered by (distance, index).
pub fn top_n(query: ArrayView1<'_, f64>, refs: ArrayView2<'_, f64>, n: usize) -> Result<Vec<usize>> {
    check(query, refs)?;
    if n == 0 || n > refs.nrows() {
        return Err(Error::InvalidInput(format!(
            "neighbor count {n} outside 1..={}",
            refs.nrows()
        )));
    }
    let mut d: Vec<(f64, usize)> = refs
        .outer_iter()
        .enumerate()
        .map(|(i, r)| (squared_distance(query, r), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < d.len() {
        d.select_nth_unstable_by(n - 1, cmp);
        d.truncate(n);
    }
    d.sort_unstable_by(cmp);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_geometry() {
        let refs = array![[0.0, 0.0], [10.0, 10.0]];
        assert_eq!(knn_label(array![1.0, 1.0].view(), refs.view(), &[0, 1]).unwrap(), 0);
        assert_eq!(knn_label(array![10.0, 10.0].view(), refs.view(), &[0, 1]).unwrap(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let refs = array![[1.0], [-1.0], [1.0]];
        assert_eq!(nearest(array![0.0].view(), refs.view()).unwrap(), 0);
        assert_eq!(top_n(array![0.0].view(), refs.view(), 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn empty_references_error() {
        let refs = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            nearest(array![0.0, 0.0].view(), refs.view()),
            Err(Error::EmptyReferences(_))
        ));
    }

    #[test]
    fn top_n_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let refs = Array2::from_shape_fn((50, 3), |_| rng.gen_range(-1.0..1.0));
        let q = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let mut all: Vec<usize> = (0..50).collect();
        all.sort_by(|&a, &b| {
            squared_distance(q.view(), refs.row(a))
                .total_cmp(&squared_distance(q.view(), refs.row(b)))
                .then(a.cmp(&b))
        });
        for n in [1, 7, 50] {
            assert_eq!(top_n(q.view(), refs.view(), n).unwrap(), all[..n]);
        }
        assert!(top_n(q.view(), refs.view(), 51).is_err());
    }
}
