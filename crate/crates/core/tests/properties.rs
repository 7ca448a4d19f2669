use behman::eval::{
    build_sessions, nearest, reference_set, similarity_confusion, top_n, trajectory, FoldPlan,
    LabelRow,
};
use behman::features::functionals::column_functionals;
use behman::features::{compute_functionals, FrameSequence};
use behman::sampling::{sample_triplet_tuples, SamplerConfig};
use behman::Exec;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, values: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| values[(r * cols + c) % values.len()] + r as f64 * 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functionals_are_functional_major(
        rows in 2usize..40,
        cols in 1usize..8,
        values in prop::collection::vec(-1e3f64..1e3, 1..200),
    ) {
        let w = matrix(rows, cols, &values);
        let out = compute_functionals(w.view()).unwrap();
        prop_assert_eq!(out.len(), cols * 6);
        prop_assert!(out.iter().all(|v| v.is_finite()));
        for c in 0..cols {
            let f = column_functionals(&w.column(c).to_vec()).unwrap();
            for (k, v) in f.iter().enumerate() {
                prop_assert_eq!(out[k * cols + c], *v);
            }
            prop_assert!(f[0] <= f[4] && f[4] <= f[1]);
            prop_assert!(f[5] >= 0.0);
        }
    }

    #[test]
    fn tuples_respect_stationarity_and_file_constraints(
        lens in prop::collection::vec(8usize..40, 2..6),
        k in 1.0f64..5.0,
        n_context in 1usize..5,
        seed in any::<u64>(),
    ) {
        let corpus: Vec<FrameSequence> = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| FrameSequence::new(format!("f{i}"), 20.0, 1.0, Array2::zeros((n, 1))))
            .collect();
        let cfg = SamplerConfig { k_seconds: k, n_context, seed };
        let kf = cfg.k_frames(1.0);
        let s = sample_triplet_tuples(&corpus, &cfg, &Exec::sequential()).unwrap();
        for t in &s.tuples {
            prop_assert_ne!(&t.anchor_source, &t.negative_source);
            let d = t.anchor.abs_diff(t.positive);
            prop_assert!(d >= 1 && d <= kf);
            let d = t.negative.abs_diff(t.negative_context);
            prop_assert!(d >= 1 && d <= kf);
        }
    }

    #[test]
    fn nearest_matches_scan(
        refs in prop::collection::vec(prop::collection::vec(-5f64..5.0, 3), 1..30),
        q in prop::collection::vec(-5f64..5.0, 3),
    ) {
        let r = Array2::from_shape_fn((refs.len(), 3), |(i, j)| refs[i][j]);
        let qa = ndarray::Array1::from(q.clone());
        let best = nearest(qa.view(), r.view()).unwrap();
        let d = |i: usize| (0..3).map(|j| (q[j] - refs[i][j]).powi(2)).sum::<f64>();
        let oracle = (0..refs.len()).fold(0, |b, i| if d(i) < d(b) { i } else { b });
        prop_assert_eq!(best, oracle);
        let order = top_n(qa.view(), r.view(), refs.len()).unwrap();
        prop_assert_eq!(order[0], oracle);
    }

    #[test]
    fn confusion_is_row_stochastic_and_scale_invariant(
        files in prop::collection::vec(prop::collection::vec(-3f64..3.0, 8), 2..5),
        exponent in -8i32..8,
    ) {
        let files: Vec<FrameSequence> = files
            .iter()
            .enumerate()
            .map(|(i, v)| FrameSequence::new(format!("f{i}"), 20.0, 1.0, Array2::from_shape_vec((4, 2), v.clone()).unwrap()))
            .collect();
        let m = similarity_confusion(&files, &Exec::sequential()).unwrap().matrix;
        for s in m.sum_axis(Axis(1)) {
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }
        for i in 0..files.len() {
            prop_assert_eq!(m[[i, i]], 0.0);
        }
        // power-of-two scales are exact, so even tied distances keep their order
        let scale = 2f64.powi(exponent);
        let scaled: Vec<FrameSequence> = files
            .iter()
            .map(|f| FrameSequence::new(f.source_id.clone(), 20.0, 1.0, &f.data * scale))
            .collect();
        let m2 = similarity_confusion(&scaled, &Exec::sequential()).unwrap().matrix;
        prop_assert_eq!(m, m2);
    }

    #[test]
    fn fold_plans_hold_out_each_group_once(
        groups in prop::collection::vec(0usize..5, 2..16),
    ) {
        let files: Vec<FrameSequence> = (0..groups.len())
            .map(|i| FrameSequence::new(format!("s{i}"), 20.0, 1.0, Array2::from_elem((3, 2), i as f64)))
            .collect();
        let rows: Vec<LabelRow> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| LabelRow {
                session_id: format!("s{i}"),
                group_id: format!("g{g}"),
                code: "c".into(),
                label: (i % 2) as u8,
            })
            .collect();
        let sessions = build_sessions(files, &rows).unwrap();
        let plan = FoldPlan::leave_one_group_out(&sessions);
        prop_assert!(plan.validate(&sessions).is_ok());
        let distinct: std::collections::BTreeSet<_> = groups.iter().collect();
        prop_assert_eq!(plan.folds.len(), distinct.len());
        for f in &plan.folds {
            prop_assert!(!f.train_groups.contains(&f.held_out));
            if let Ok((refs, _)) = reference_set(&sessions, &f.train_groups, "c") {
                let held: usize = sessions.iter().filter(|s| s.group_id == f.held_out).map(|s| s.frames.len()).sum();
                prop_assert_eq!(refs.nrows() + held, sessions.len() * 3);
            }
        }
    }

    #[test]
    fn trajectory_scores_count_positive_neighbors(
        refs in prop::collection::vec((prop::collection::vec(-4f64..4.0, 2), 0u8..2), 3..40),
        query in prop::collection::vec(-4f64..4.0, 2..12),
        n in 1usize..10,
    ) {
        let n = n.min(refs.len());
        let r = Array2::from_shape_fn((refs.len(), 2), |(i, j)| refs[i].0[j]);
        let labels: Vec<u8> = refs.iter().map(|x| x.1).collect();
        let q = FrameSequence::new("q", 20.0, 1.0, Array2::from_shape_fn((query.len() / 2, 2), |(i, j)| query[2 * i + j]));
        let tr = trajectory(&q, r.view(), &labels, n, "c", &Exec::sequential()).unwrap();
        for (i, s) in tr.scores.iter().enumerate() {
            let top = top_n(q.frame(i), r.view(), n).unwrap();
            let pos = top.iter().filter(|&&j| labels[j] == 1).count();
            prop_assert_eq!(*s, pos as f64 / n as f64);
            prop_assert!((0.0..=1.0).contains(s));
        }
    }
}
