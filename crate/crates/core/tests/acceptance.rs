//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::Instant;

use behman::eval::{
    build_sessions, classify_sessions, nearest, similarity_confusion, trajectory, FoldPlan,
    LabelRow, RawFeatures, SessionRecord, DEFAULT_TRAJECTORY_N,
};
use behman::features::functionals::{column_functionals, FUNCTIONALS};
use behman::features::io::encode_features;
use behman::features::{compute_functionals, compute_lld_sequence, extract_features, AudioBuffer, FrameSequence, LldConfig};
use behman::model::loss::{reconstruction_loss, triplet_loss};
use behman::model::{compute_gradients, total_loss, NetworkParams, Objective, TrainConfig, TupleBatch, Variant};
use behman::synth::{render_audio, run_ordering, BenchConfig, SynthConfig};
use behman::Exec;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORDERING_SEEDS: [u64; 3] = [0, 1, 2];
const ORDERING_MARGIN: f64 = 0.10;
const GRADIENT_INSTANCES: usize = 20;
const GRADIENT_RTOL: f64 = 1e-4;
const IDENTITY_TOL: f64 = 1e-9;
const FUNCTIONAL_TOL: f64 = 1e-9;
const PITCH_RTOL: f64 = 0.02;
const KNN_QUERIES: usize = 1000;
const ROW_SUM_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

// ---------------------------------------------------------------- ordering

fn ordering() -> Outcome {
    let bench = BenchConfig::default();
    let mut lines = Vec::new();
    let mut all = true;
    for seed in ORDERING_SEEDS {
        let run = run_ordering(&bench.clone().with_seed(seed), &Exec::default()).map_err(|e| e.to_string())?;
        let (raw, dcn, te) = (run.raw.accuracy, run.dcn.accuracy, run.te_dcn.accuracy);
        let ok = te >= dcn && dcn >= raw && te - raw >= ORDERING_MARGIN - 1e-9;
        all &= ok;
        lines.push(format!("seed {seed}: raw {raw:.3} dcn {dcn:.3} te-dcn {te:.3}"));
    }
    let detail = lines.join("; ");
    check(all, detail.clone(), detail)
}

// ---------------------------------------------------------------- gradients

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> TupleBatch {
    let mut m = || Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.5..1.5));
    TupleBatch {
        anchor: m(),
        positive: m(),
        negative: m(),
        negative_context: m(),
    }
}

fn flat_set(p: &mut NetworkParams, k: usize, delta: f64) {
    let mut left = k;
    for t in p.tensors_mut() {
        if left < t.len() {
            t[left] += delta;
            return;
        }
        left -= t.len();
    }
}

fn gradient_suite() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..GRADIENT_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let variant = Variant::ALL[i % 4];
        let d = rng.gen_range(4..8);
        let h = rng.gen_range(3..6);
        let b = rng.gen_range(2..4);
        let dims = [d, h, b, h, d];
        let mut params = NetworkParams::init(&dims, variant, i as u64).map_err(|e| e.to_string())?;
        for l in &mut params.layers {
            if let Some(s) = &mut l.slope {
                *s = rng.gen_range(0.05..0.6);
            }
            l.bias.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        let batch = random_batch(&mut rng, 5, d);
        let obj = Objective::new(variant, rng.gen_range(0.5..3.0), rng.gen_range(0.0..0.1));
        let (_, grads) = compute_gradients(&params, &batch, &obj).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = grads.tensors().concat();
        let step = 1e-4;
        for (k, &a) in analytic.iter().enumerate() {
            flat_set(&mut params, k, step);
            let up = total_loss(&params, &batch, &obj).unwrap();
            flat_set(&mut params, k, -2.0 * step);
            let down = total_loss(&params, &batch, &obj).unwrap();
            flat_set(&mut params, k, step);
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max((numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-3));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let detail = format!("{GRADIENT_INSTANCES} instances, max relative error {worst:.2e}, {secs:.1}s");
    check(worst < GRADIENT_RTOL && secs < 60.0, detail.clone(), detail)
}

// ---------------------------------------------------------------- loss identities

fn loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((8, 5), |_| rng.gen_range(-2.0..2.0));
    let recon_same = reconstruction_loss(x.view(), x.view()).unwrap();

    let margin = 1.5;
    let a = Array2::<f64>::zeros((3, 4));
    let mut p = a.clone();
    let mut n = a.clone();
    for i in 0..3 {
        p[[i, 0]] = 0.5;
        n[[i, 1]] = 0.5 + margin + 0.25 * i as f64;
    }
    let satisfied = triplet_loss(a.view(), p.view(), n.view(), margin).unwrap();
    let collapsed = triplet_loss(a.view(), p.view(), p.view(), margin).unwrap();

    let mut worst_l2: f64 = 0.0;
    for v in Variant::ALL {
        let params = NetworkParams::init(&[6, 5, 3, 5, 6], v, 3).unwrap();
        let obj = Objective::new(v, margin, 0.01);
        let zero = TupleBatch {
            anchor: Array2::zeros((4, 6)),
            positive: Array2::zeros((4, 6)),
            negative: Array2::zeros((4, 6)),
            negative_context: Array2::zeros((4, 6)),
        };
        let layers = if v.uses_decoder() { params.layers.len() } else { params.encoder_len() };
        let l2: f64 = params.layers[..layers]
            .iter()
            .map(|l| l.weight.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
            * obj.l2_weight;
        // identical zero embeddings leave exactly the margin per tuple
        let hinge = if v.uses_triplet() { 4.0 * margin } else { 0.0 };
        let total = total_loss(&params, &zero, &obj).unwrap();
        worst_l2 = worst_l2.max((total - hinge - l2).abs());
    }
    let detail = format!(
        "recon(x,x) {recon_same:.1e}, satisfied triplet {satisfied:.1e}, e_p=e_n {:.1e} off m, zero-data residual {worst_l2:.1e}",
        (collapsed - 3.0 * margin).abs() / 3.0
    );
    check(
        recon_same.abs() <= IDENTITY_TOL
            && satisfied.abs() <= IDENTITY_TOL
            && (collapsed - 3.0 * margin).abs() <= IDENTITY_TOL
            && worst_l2 <= IDENTITY_TOL,
        detail.clone(),
        detail,
    )
}

// ---------------------------------------------------------------- features

fn percentile_oracle(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] * (1.0 - (pos - lo as f64)) + sorted[hi] * (pos - lo as f64)
}

fn functional_oracle(values: &[f64]) -> [f64; 6] {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let std = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let (p1, p99) = (percentile_oracle(&s, 1.0), percentile_oracle(&s, 99.0));
    [p1, p99, p99 - p1, mean, percentile_oracle(&s, 50.0), std]
}

fn sine(freq: f64, secs: f64) -> AudioBuffer {
    let sr = 16_000;
    let n = (secs * sr as f64) as usize;
    let x = (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
        .collect();
    AudioBuffer::new(x, sr).unwrap()
}

fn feature_suite() -> Outcome {
    let cfg = LldConfig::default();
    let audio = render_audio(&[0; 24], 0.0, 16_000, 5).map_err(|e| e.to_string())?;
    let a = extract_features(&audio, &cfg, 20.0, 1.0, "tone", &Exec::sequential()).map_err(|e| e.to_string())?;
    let b = extract_features(&audio, &cfg, 20.0, 1.0, "tone", &Exec::default()).map_err(|e| e.to_string())?;
    let dims = a.dim();
    let identical = encode_features(&a) == encode_features(&b);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for rows in [2usize, 3, 7, 100, 1998] {
        let w = Array2::from_shape_fn((rows, 5), |_| rng.gen_range(-50.0..50.0));
        let got = compute_functionals(w.view()).unwrap();
        for c in 0..5 {
            let col: Vec<f64> = w.column(c).to_vec();
            let want = functional_oracle(&col);
            let direct = column_functionals(&col).unwrap();
            for f in 0..FUNCTIONALS.len() {
                worst = worst.max((got[f * 5 + c] - want[f]).abs()).max((direct[f] - want[f]).abs());
            }
        }
    }

    let llds = compute_lld_sequence(&sine(440.0, 1.0), &cfg).map_err(|e| e.to_string())?;
    let pitch: Vec<f64> = llds.frames.column(0).iter().copied().filter(|&p| p > 0.0).collect();
    let pitch_err = pitch.iter().map(|p| (p - 440.0).abs() / 440.0).fold(0.0, f64::max);

    let detail = format!(
        "dim {dims}, functional max error {worst:.1e}, 440 Hz max rel error {pitch_err:.4} over {} voiced frames, byte-identical {identical}",
        pitch.len()
    );
    check(
        dims == 420 && worst <= FUNCTIONAL_TOL && !pitch.is_empty() && pitch_err <= PITCH_RTOL && identical,
        detail.clone(),
        detail,
    )
}

// ---------------------------------------------------------------- evaluation

fn scan_oracle(q: ndarray::ArrayView1<'_, f64>, refs: &Array2<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, r) in refs.rows().into_iter().enumerate() {
        let d: f64 = q.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn toy_sessions(rng: &mut ChaCha8Rng) -> Vec<SessionRecord> {
    let files: Vec<FrameSequence> = (0..12)
        .map(|i| {
            let shift = if i % 2 == 0 { 1.0 } else { -1.0 };
            let data = Array2::from_shape_fn((15, 4), |_| shift + rng.gen_range(-1.5..1.5));
            FrameSequence::new(format!("s{i:02}"), 20.0, 1.0, data)
        })
        .collect();
    let rows: Vec<LabelRow> = (0..12)
        .map(|i| LabelRow {
            session_id: format!("s{i:02}"),
            group_id: format!("g{}", i / 3),
            code: "c".into(),
            label: (i % 2) as u8,
        })
        .collect();
    build_sessions(files, &rows).unwrap()
}

fn evaluation_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let refs = Array2::from_shape_fn((300, 8), |_| rng.gen_range(-1.0..1.0));
    let mut mismatches = 0;
    for _ in 0..KNN_QUERIES {
        let q = Array2::from_shape_fn((1, 8), |_| rng.gen_range(-1.0..1.0));
        if nearest(q.row(0), refs.view()).unwrap() != scan_oracle(q.row(0), &refs) {
            mismatches += 1;
        }
    }

    let sessions = toy_sessions(&mut rng);
    let plan = FoldPlan::leave_one_group_out(&sessions);
    let leaks = plan
        .folds
        .iter()
        .filter(|f| f.train_groups.contains(&f.held_out))
        .count();
    let plan_valid = plan.validate(&sessions).is_ok();
    let report = classify_sessions(&sessions, "c", &RawFeatures, &plan, &Exec::sequential()).unwrap();

    let files: Vec<FrameSequence> = sessions.iter().map(|s| s.frames.clone()).collect();
    let m = similarity_confusion(&files, &Exec::sequential()).unwrap();
    let row_err = m
        .matrix
        .sum_axis(Axis(1))
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let scaled: Vec<FrameSequence> = files
        .iter()
        .map(|f| FrameSequence::new(f.source_id.clone(), f.window_s, f.shift_s, &f.data * 3.7))
        .collect();
    let scale_invariant = similarity_confusion(&scaled, &Exec::sequential()).unwrap().matrix == m.matrix;

    let refs_all = ndarray::concatenate(Axis(0), &files[3..].iter().map(|f| f.data.view()).collect::<Vec<_>>()).unwrap();
    let labels: Vec<u8> = sessions[3..]
        .iter()
        .flat_map(|s| std::iter::repeat(s.labels["c"]).take(s.frames.len()))
        .collect();
    let tr = trajectory(&files[0], refs_all.view(), &labels, DEFAULT_TRAJECTORY_N, "c", &Exec::sequential()).unwrap();
    let bounded = tr.scores.iter().all(|s| (0.0..=1.0).contains(s));

    let detail = format!(
        "kNN mismatches {mismatches}/{KNN_QUERIES}, fold leaks {leaks}, plan valid {plan_valid}, {} sessions classified, \
         row-sum error {row_err:.1e}, scale-invariant {scale_invariant}, trajectory N={} bounded {bounded}",
        report.n_sessions, tr.n
    );
    check(
        mismatches == 0
            && leaks == 0
            && plan_valid
            && report.n_sessions == sessions.len()
            && row_err <= ROW_SUM_TOL
            && scale_invariant
            && tr.n == 60
            && bounded,
        detail.clone(),
        detail,
    )
}

// ---------------------------------------------------------------- determinism

fn pipeline(jobs: usize) -> Result<Vec<(String, u8, usize)>, String> {
    let exec = Exec::with_jobs(jobs).map_err(|e| e.to_string())?;
    let bench = BenchConfig {
        corpus: SynthConfig {
            n_files: 6,
            file_duration_s: 60.0,
            ..BenchConfig::default().corpus
        },
        train_n_files: 8,
        train_file_duration_s: 40.0,
        train: TrainConfig {
            max_epochs: 2,
            batch_size: 64,
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    }
    .with_seed(3);
    let run = run_ordering(&bench, &exec).map_err(|e| e.to_string())?;
    Ok([run.raw, run.dcn, run.te_dcn]
        .iter()
        .flat_map(|r| r.predictions.iter().map(|p| (p.session_id.clone(), p.predicted, p.positive_votes)))
        .collect())
}

fn determinism() -> Outcome {
    let one = pipeline(1)?;
    let four = pipeline(4)?;
    let again = pipeline(4)?;
    let detail = format!(
        "{} predictions; jobs 1 vs 4 identical {}, repeat identical {}",
        one.len(),
        one == four,
        four == again
    );
    check(one == four && four == again, detail.clone(), detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("gradient suite", gradient_suite),
        ("loss identities", loss_identities),
        ("feature suite", feature_suite),
        ("evaluation suite", evaluation_suite),
        ("determinism across --jobs", determinism),
        ("ordering te-dcn >= dcn >= raw, te-dcn >= raw + 0.10", ordering),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
