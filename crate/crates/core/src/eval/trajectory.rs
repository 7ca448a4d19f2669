//! Per-frame behavior scores from labeled nearest neighbors.

use ndarray::ArrayView2;

use super::knn::top_n;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FrameSequence;

pub const DEFAULT_TRAJECTORY_N: usize = 60;

/// Fraction of positive references among each frame's `n` nearest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScore {
    pub code: String,
    pub n: usize,
    pub t_start_s: Vec<f64>,
    pub scores: Vec<f64>,
}

pub fn trajectory(
    session: &FrameSequence,
    refs: ArrayView2<'_, f64>,
    labels: &[u8],
    n: usize,
    code: &str,
    exec: &Exec,
) -> Result<TrajectoryScore> {
    if labels.len() != refs.nrows() {
        return Err(Error::DimensionMismatch {
            expected: refs.nrows(),
            got: labels.len(),
        });
    }
    if n == 0 || n > refs.nrows() {
        return Err(Error::InvalidInput(format!(
            "trajectory needs 1..={} neighbors, got N = {n}",
            refs.nrows()
        )));
    }
    let scores = exec
        .map_range(session.len(), |i| {
            let idx = top_n(session.frame(i), refs, n)?;
            Ok(idx.iter().filter(|&&j| labels[j] == 1).count() as f64 / n as f64)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(TrajectoryScore {
        code: code.to_string(),
        n,
        t_start_s: (0..session.len()).map(|i| session.t_start_s(i)).collect(),
        scores,
    })
}

/// `t_start_s,code,score` rows, one series after another.
pub fn trajectory_csv(series: &[TrajectoryScore]) -> String {
    let mut s = String::from("t_start_s,code,score\n");
    for t in series {
        for (time, score) in t.t_start_s.iter().zip(&t.scores) {
            s.push_str(&format!("{time},{},{score}\n", t.code));
        }
    }
    s
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n_refs: usize) -> (FrameSequence, Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let refs = Array2::from_shape_fn((n_refs, 4), |_| rng.gen_range(-1.0..1.0));
        let labels = (0..n_refs).map(|_| rng.gen_range(0..2u8)).collect();
        let q = Array2::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        (FrameSequence::new("s", 20.0, 1.0, q), refs, labels)
    }

    #[test]
    fn all_positive_refs_give_ones() {
        let (q, refs, _) = setup(80);
        let t = trajectory(&q, refs.view(), &[1; 80], 60, "c", &Exec::sequential()).unwrap();
        assert!(t.scores.iter().all(|&s| s == 1.0));
        assert_eq!(t.t_start_s[3], 3.0);
    }

    #[test]
    fn n_equal_to_refs_gives_global_fraction() {
        let (q, refs, labels) = setup(70);
        let frac = labels.iter().filter(|&&l| l == 1).count() as f64 / 70.0;
        let t = trajectory(&q, refs.view(), &labels, 70, "c", &Exec::sequential()).unwrap();
        assert!(t.scores.iter().all(|&s| (s - frac).abs() < 1e-12));
    }

    #[test]
    fn too_few_refs_errors() {
        let (q, refs, labels) = setup(30);
        assert!(trajectory(&q, refs.view(), &labels, DEFAULT_TRAJECTORY_N, "c", &Exec::sequential()).is_err());
    }

    #[test]
    fn flipping_a_label_to_positive_never_lowers_scores() {
        let (q, refs, mut labels) = setup(100);
        let before = trajectory(&q, refs.view(), &labels, 60, "c", &Exec::sequential()).unwrap();
        let j = labels.iter().position(|&l| l == 0).unwrap();
        labels[j] = 1;
        let after = trajectory(&q, refs.view(), &labels, 60, "c", &Exec::sequential()).unwrap();
        for (a, b) in before.scores.iter().zip(&after.scores) {
            assert!(b >= a);
        }
    }

    #[test]
    fn csv_layout() {
        let t = TrajectoryScore {
            code: "blame".into(),
            n: 1,
            t_start_s: vec![0.0, 1.0],
            scores: vec![0.5, 1.0],
        };
        assert_eq!(trajectory_csv(&[t]), "t_start_s,code,score\n0,blame,0.5\n1,blame,1\n");
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
