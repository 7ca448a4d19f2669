//! Leave-one-group-out session classification by frame-level 1-NN and
//! majority vote.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::knn::nearest;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FrameSequence;
use crate::model::Checkpoint;
use crate::sampling::stream_seed;

/// One labeled session. `frames` may hold raw features or embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub group_id: String,
    pub frames: FrameSequence,
    pub labels: BTreeMap<String, u8>,
}

/// Maps frames into the space where neighbors are searched.
pub trait Embedder: Sync {
    fn embed(&self, seq: &FrameSequence, exec: &Exec) -> Result<FrameSequence>;
}

/// Frames used as they are.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawFeatures;

impl Embedder for RawFeatures {
    fn embed(&self, seq: &FrameSequence, _exec: &Exec) -> Result<FrameSequence> {
        Ok(seq.clone())
    }
}

impl Embedder for Checkpoint {
    fn embed(&self, seq: &FrameSequence, exec: &Exec) -> Result<FrameSequence> {
        let e = Checkpoint::embed(self, seq, exec)?;
        Ok(FrameSequence::new(seq.source_id.clone(), seq.window_s, seq.shift_s, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub held_out: String,
    pub train_groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// One fold per distinct group, in sorted group order.
    pub fn leave_one_group_out(sessions: &[SessionRecord]) -> Self {
        let groups: BTreeSet<&str> = sessions.iter().map(|s| s.group_id.as_str()).collect();
        let folds = groups
            .iter()
            .map(|g| Fold {
                held_out: g.to_string(),
                train_groups: groups.iter().filter(|o| *o != g).map(|o| o.to_string()).collect(),
            })
            .collect();
        Self { folds }
    }

    /// Every group held out exactly once and never among its own references.
    pub fn validate(&self, sessions: &[SessionRecord]) -> Result<()> {
        let groups: BTreeSet<&str> = sessions.iter().map(|s| s.group_id.as_str()).collect();
        let mut seen = BTreeSet::new();
        for f in &self.folds {
            if !seen.insert(f.held_out.as_str()) {
                return Err(Error::InvalidInput(format!("group {:?} held out twice", f.held_out)));
            }
            if f.train_groups.iter().any(|g| *g == f.held_out) {
                return Err(Error::InvalidInput(format!(
                    "group {:?} is among its own references",
                    f.held_out
                )));
            }
            if let Some(g) = f.train_groups.iter().find(|g| !groups.contains(g.as_str())) {
                return Err(Error::InvalidInput(format!("unknown reference group {g:?}")));
            }
        }
        if let Some(g) = groups.iter().find(|g| !seen.contains(*g)) {
            return Err(Error::InvalidInput(format!("group {g:?} is never held out")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionPrediction {
    pub session_id: String,
    pub group_id: String,
    pub truth: u8,
    pub predicted: u8,
    pub n_frames: usize,
    pub positive_votes: usize,
}

impl SessionPrediction {
    pub fn correct(&self) -> bool {
        self.truth == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub code: String,
    pub n_sessions: usize,
    pub accuracy: f64,
    pub predictions: Vec<SessionPrediction>,
}

fn label_of(s: &SessionRecord, code: &str) -> Result<u8> {
    s.labels
        .get(code)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("session {:?} has no label for {code:?}", s.session_id)))
}

/// Reference frames and per-frame labels from every session in `groups`.
pub fn reference_set(
    sessions: &[SessionRecord],
    groups: &[String],
    code: &str,
) -> Result<(Array2<f64>, Vec<u8>)> {
    let groups: BTreeSet<&str> = groups.iter().map(String::as_str).collect();
    let mut blocks: Vec<ArrayView2<'_, f64>> = Vec::new();
    let mut labels = Vec::new();
    for s in sessions.iter().filter(|s| groups.contains(s.group_id.as_str())) {
        let y = label_of(s, code)?;
        blocks.push(s.frames.data.view());
        labels.extend(std::iter::repeat(y).take(s.frames.len()));
    }
    if labels.is_empty() {
        return Err(Error::EmptyReferences(format!("no reference frames for {code:?}")));
    }
    let refs = concatenate(Axis(0), &blocks).map_err(|_| Error::InvalidInput("reference dimensions differ".into()))?;
    Ok((refs, labels))
}

/// Frame labels by 1-NN against sessions outside the held-out group, then a
/// majority vote per session. An exact vote tie predicts 1.
///
/// Predictions come back in (fold, session) order.
pub fn classify_sessions(
    sessions: &[SessionRecord],
    code: &str,
    embedder: &dyn Embedder,
    plan: &FoldPlan,
    exec: &Exec,
) -> Result<ClassificationReport> {
    plan.validate(sessions)?;
    for s in sessions {
        label_of(s, code)?;
    }
    let embedded = sessions
        .iter()
        .map(|s| {
            Ok(SessionRecord {
                frames: embedder.embed(&s.frames, exec)?,
                ..s.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut predictions = Vec::with_capacity(sessions.len());
    for fold in &plan.folds {
        let (refs, ref_labels) = reference_set(&embedded, &fold.train_groups, code)?;
        for s in embedded.iter().filter(|s| s.group_id == fold.held_out) {
            let frame_labels = exec.map_range(s.frames.len(), |i| {
                nearest(s.frames.frame(i), refs.view()).map(|j| ref_labels[j])
            });
            let mut positive = 0;
            for l in frame_labels {
                positive += l? as usize;
            }
            let n = s.frames.len();
            predictions.push(SessionPrediction {
                session_id: s.session_id.clone(),
                group_id: s.group_id.clone(),
                truth: label_of(s, code)?,
                predicted: (2 * positive >= n) as u8,
                n_frames: n,
                positive_votes: positive,
            });
        }
    }
    let correct = predictions.iter().filter(|p| p.correct()).count();
    Ok(ClassificationReport {
        code: code.to_string(),
        n_sessions: predictions.len(),
        accuracy: if predictions.is_empty() {
            0.0
        } else {
            correct as f64 / predictions.len() as f64
        },
        predictions,
    })
}

/// Equal numbers of 0- and 1-labeled sessions for `code`, picked by a seeded
/// shuffle. `per_class` defaults to the minority count.
pub fn balanced_subset(
    sessions: &[SessionRecord],
    code: &str,
    per_class: Option<usize>,
    seed: u64,
) -> Result<Vec<SessionRecord>> {
    let mut by_class: [Vec<&SessionRecord>; 2] = [Vec::new(), Vec::new()];
    for s in sessions {
        by_class[label_of(s, code)? as usize].push(s);
    }
    let available = by_class[0].len().min(by_class[1].len());
    let k = per_class.unwrap_or(available);
    if k > available {
        return Err(Error::InvalidInput(format!(
            "{k} sessions per class requested for {code:?}, only {available} available"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, code, "balance"));
    let mut out = Vec::with_capacity(2 * k);
    for class in &mut by_class {
        class.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        class.shuffle(&mut rng);
        out.extend(class.iter().take(k).map(|s| (*s).clone()));
    }
    out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(out)
}

/// Paired correctness counts for comparing two classifiers on the same sessions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct McNemarCounts {
    pub both_correct: usize,
    pub only_first: usize,
    pub only_second: usize,
    pub both_wrong: usize,
}

pub fn mcnemar_counts(first: &[SessionPrediction], second: &[SessionPrediction]) -> Result<McNemarCounts> {
    let other: HashMap<&str, &SessionPrediction> =
        second.iter().map(|p| (p.session_id.as_str(), p)).collect();
    if other.len() != first.len() {
        return Err(Error::InvalidInput("prediction sets cover different sessions".into()));
    }
    let mut c = McNemarCounts::default();
    for p in first {
        let q = other
            .get(p.session_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("session {:?} missing", p.session_id)))?;
        match (p.correct(), q.correct()) {
            (true, true) => c.both_correct += 1,
            (true, false) => c.only_first += 1,
            (false, true) => c.only_second += 1,
            (false, false) => c.both_wrong += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub session_id: String,
    pub group_id: String,
    pub code: String,
    pub label: u8,
}

/// Parses `session_id,group_id,code,label` with a header row.
pub fn parse_labels_csv(text: &str) -> Result<Vec<LabelRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "session_id,group_id,code,label" => {}
        _ => {
            return Err(Error::InvalidInput(
                "labels file must start with header session_id,group_id,code,label".into(),
            ))
        }
    }
    lines
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |why: &str| Error::InvalidInput(format!("labels line {}: {why}", n + 1));
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            if f[0].is_empty() || f[1].is_empty() || f[2].is_empty() {
                return Err(bad("empty field"));
            }
            let label = match f[3] {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("label must be 0 or 1")),
            };
            Ok(LabelRow {
                session_id: f[0].into(),
                group_id: f[1].into(),
                code: f[2].into(),
                label,
            })
        })
        .collect()
}

pub fn format_labels_csv(rows: &[LabelRow]) -> String {
    let mut s = String::from("session_id,group_id,code,label\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.session_id, r.group_id, r.code, r.label));
    }
    s
}

/// Joins feature files with label rows by session id. Files without labels
/// are left out; labeled sessions without a file are an error.
pub fn build_sessions(files: Vec<FrameSequence>, rows: &[LabelRow]) -> Result<Vec<SessionRecord>> {
    let mut meta: BTreeMap<&str, (&str, BTreeMap<String, u8>)> = BTreeMap::new();
    for r in rows {
        let entry = meta
            .entry(r.session_id.as_str())
            .or_insert_with(|| (r.group_id.as_str(), BTreeMap::new()));
        if entry.0 != r.group_id {
            return Err(Error::InvalidInput(format!(
                "session {:?} listed under groups {:?} and {:?}",
                r.session_id, entry.0, r.group_id
            )));
        }
        if entry.1.insert(r.code.clone(), r.label).is_some_and(|old| old != r.label) {
            return Err(Error::InvalidInput(format!(
                "conflicting labels for {:?} / {:?}",
                r.session_id, r.code
            )));
        }
    }
    let mut by_id: HashMap<String, FrameSequence> =
        files.into_iter().map(|f| (f.source_id.clone(), f)).collect();
    meta.into_iter()
        .map(|(id, (group, labels))| {
            let frames = by_id
                .remove(id)
                .ok_or_else(|| Error::InvalidInput(format!("no feature file for labeled session {id:?}")))?;
            if frames.is_empty() {
                return Err(Error::InvalidInput(format!("session {id:?} has no frames")));
            }
            Ok(SessionRecord {
                session_id: id.to_string(),
                group_id: group.to_string(),
                frames,
                labels,
            })
        })
        .collect()
}

pub fn predictions_csv(report: &ClassificationReport) -> String {
    let mut s = String::from("session_id,group_id,code,truth,predicted,n_frames,positive_votes\n");
    for p in &report.predictions {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.session_id, p.group_id, report.code, p.truth, p.predicted, p.n_frames, p.positive_votes
        ));
    }
    s
}
