use std::collections::{HashMap, HashSet};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{decayed_lr, Adam};
use super::checkpoint::{Checkpoint, EpochRecord};
use super::network::{NetworkParams, Variant, DEFAULT_DIMS};
use super::objective::{batch_gradients, data_loss, l2_penalty, Objective, TupleBatch, GRADIENT_CHUNK};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FrameSequence;
use crate::sampling::{stream_seed, TripletTuple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Multiplier applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub margin: f64,
    pub l2_weight: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            lr_decay: 0.1,
            lr_decay_every: 10,
            margin: 2.0,
            l2_weight: 0.01,
            batch_size: 256,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            dims: DEFAULT_DIMS.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.lr > 0.0 && self.lr_decay > 0.0 && self.l2_weight >= 0.0;
        if !positive || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "lr, lr_decay, batch_size and max_epochs must be positive; l2_weight >= 0".into(),
            ));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::Config("margin must be >= 0".into()));
        }
        Ok(())
    }

    pub fn objective(&self, variant: Variant) -> Objective {
        Objective::new(variant, self.margin, self.l2_weight)
    }
}

/// Per-feature z-normalization fitted on the training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Normalization {
    /// Features with (near) zero spread get unit scale.
    pub fn fit<'a>(blocks: impl IntoIterator<Item = ArrayView2<'a, f64>>) -> Result<Self> {
        let mut sum: Option<Array1<f64>> = None;
        let mut sq: Option<Array1<f64>> = None;
        let mut n = 0usize;
        for b in blocks {
            let s = b.sum_axis(Axis(0));
            let q = b.mapv(|v| v * v).sum_axis(Axis(0));
            match (&mut sum, &mut sq) {
                (Some(a), Some(c)) => {
                    if a.len() != s.len() {
                        return Err(Error::DimensionMismatch {
                            expected: a.len(),
                            got: s.len(),
                        });
                    }
                    *a += &s;
                    *c += &q;
                }
                _ => {
                    sum = Some(s);
                    sq = Some(q);
                }
            }
            n += b.nrows();
        }
        let (sum, sq) = match (sum, sq) {
            (Some(s), Some(q)) if n > 0 => (s, q),
            _ => return Err(Error::InvalidInput("no frames to fit normalization".into())),
        };
        let mean = sum / n as f64;
        let var = sq / n as f64 - &mean * &mean;
        let std = var.mapv(|v| {
            let s = v.max(0.0).sqrt();
            if s < 1e-8 {
                1.0
            } else {
                s
            }
        });
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        Ok((&x - &self.mean) / &self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FrameRef {
    file: usize,
    row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ResolvedTuple {
    anchor: FrameRef,
    positive: FrameRef,
    negative: FrameRef,
    negative_context: FrameRef,
}

/// Tuples resolved against the frame sequences they index into.
#[derive(Debug, Clone)]
pub struct TupleSet {
    files: Vec<FrameSequence>,
    tuples: Vec<ResolvedTuple>,
}

impl TupleSet {
    pub fn new(files: Vec<FrameSequence>, tuples: &[TripletTuple]) -> Result<Self> {
        let index: HashMap<&str, usize> = files
            .iter()
            .enumerate()
            .map(|(i, f)| (f.source_id.as_str(), i))
            .collect();
        let resolve = |source: &str, row: usize| -> Result<FrameRef> {
            let file = *index
                .get(source)
                .ok_or_else(|| Error::InvalidInput(format!("tuple references unknown source {source:?}")))?;
            if row >= files[file].len() {
                return Err(Error::InvalidInput(format!(
                    "tuple references frame {row} of {source:?}, which has {} frames",
                    files[file].len()
                )));
            }
            Ok(FrameRef { file, row })
        };
        let tuples = tuples
            .iter()
            .map(|t| {
                Ok(ResolvedTuple {
                    anchor: resolve(&t.anchor_source, t.anchor)?,
                    positive: resolve(&t.anchor_source, t.positive)?,
                    negative: resolve(&t.negative_source, t.negative)?,
                    negative_context: resolve(&t.negative_source, t.negative_context)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { files, tuples })
    }

    /// Splits by source: training tuples never touch a validation file;
    /// validation tuples are those anchored in a validation file.
    pub fn split(
        files: &[FrameSequence],
        tuples: &[TripletTuple],
        val_sources: &[String],
    ) -> Result<(TupleSet, TupleSet)> {
        let val: HashSet<&str> = val_sources.iter().map(String::as_str).collect();
        for v in &val {
            if !files.iter().any(|f| f.source_id == *v) {
                return Err(Error::InvalidInput(format!("validation source {v:?} not found")));
            }
        }
        let train_tuples: Vec<TripletTuple> = tuples
            .iter()
            .filter(|t| !val.contains(t.anchor_source.as_str()) && !val.contains(t.negative_source.as_str()))
            .cloned()
            .collect();
        let val_tuples: Vec<TripletTuple> = tuples
            .iter()
            .filter(|t| val.contains(t.anchor_source.as_str()))
            .cloned()
            .collect();
        let train_files = files
            .iter()
            .filter(|f| !val.contains(f.source_id.as_str()))
            .cloned()
            .collect();
        Ok((
            TupleSet::new(train_files, &train_tuples)?,
            TupleSet::new(files.to_vec(), &val_tuples)?,
        ))
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn files(&self) -> &[FrameSequence] {
        &self.files
    }

    fn normalized(&self, norm: &Normalization) -> Result<Vec<Array2<f64>>> {
        self.files.iter().map(|f| norm.apply(f.data.view())).collect()
    }
}

fn gather(files: &[Array2<f64>], refs: impl Iterator<Item = FrameRef>, n: usize, dim: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, dim));
    for (i, r) in refs.enumerate() {
        out.row_mut(i).assign(&files[r.file].row(r.row));
    }
    out
}

fn build_batch(files: &[Array2<f64>], tuples: &[ResolvedTuple], order: &[usize]) -> TupleBatch {
    let dim = files[0].ncols();
    let n = order.len();
    let pick = |f: fn(&ResolvedTuple) -> FrameRef| {
        gather(files, order.iter().map(|&i| f(&tuples[i])), n, dim)
    };
    TupleBatch {
        anchor: pick(|t| t.anchor),
        positive: pick(|t| t.positive),
        negative: pick(|t| t.negative),
        negative_context: pick(|t| t.negative_context),
    }
}

/// Mean data loss per tuple plus the L2 penalty.
fn evaluate(
    params: &NetworkParams,
    files: &[Array2<f64>],
    set: &TupleSet,
    obj: &Objective,
    exec: &Exec,
) -> Result<f64> {
    let n_chunks = set.len().div_ceil(GRADIENT_CHUNK);
    let order: Vec<usize> = (0..set.len()).collect();
    let parts = exec.map_range(n_chunks, |c| {
        let rows = &order[c * GRADIENT_CHUNK..((c + 1) * GRADIENT_CHUNK).min(set.len())];
        data_loss(params, &build_batch(files, &set.tuples, rows), obj)
    });
    let mut sum = 0.0;
    for p in parts {
        sum += p?;
    }
    Ok(sum / set.len() as f64 + l2_penalty(params, obj))
}

/// Trains one network with Adam and early stopping on the validation loss,
/// returning the best checkpoint seen.
pub fn train(
    train_set: &TupleSet,
    val_set: &TupleSet,
    cfg: &TrainConfig,
    variant: Variant,
    exec: &Exec,
) -> Result<Checkpoint> {
    train_with_objective(train_set, val_set, cfg, cfg.objective(variant), exec)
}

/// As [`train`], with full control over the objective weights.
pub fn train_with_objective(
    train_set: &TupleSet,
    val_set: &TupleSet,
    cfg: &TrainConfig,
    obj: Objective,
    exec: &Exec,
) -> Result<Checkpoint> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTupleSet("training".into()));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyTupleSet("validation".into()));
    }
    let norm = Normalization::fit(train_set.files.iter().map(|f| f.data.view()))?;
    if norm.dim() != cfg.dims[0] {
        return Err(Error::DimensionMismatch {
            expected: cfg.dims[0],
            got: norm.dim(),
        });
    }
    let train_frames = train_set.normalized(&norm)?;
    let val_frames = val_set.normalized(&norm)?;

    let mut params = NetworkParams::init(&cfg.dims, obj.variant, cfg.seed)?;
    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(&lens);

    let initial_val_loss = evaluate(&params, &val_frames, val_set, &obj, exec)?;
    log::info!("{}: initial validation loss {initial_val_loss:.4}", obj.variant);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, NetworkParams)> = None;
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let lr = decayed_lr(cfg.lr, cfg.lr_decay, cfg.lr_decay_every, epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, "epoch", &epoch.to_string()));
        order.shuffle(&mut rng);

        let mut train_loss = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = build_batch(&train_frames, &train_set.tuples, idx);
            let (loss, grads) = batch_gradients(&params, &batch, &obj, exec).map_err(|e| {
                Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: e.to_string(),
                }
            })?;
            if !loss.is_finite() || !grads.max_abs().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("loss {loss}, max |grad| {}", grads.max_abs()),
                });
            }
            train_loss += loss;
            let g = grads.tensors();
            adam.step(&mut params.tensors_mut(), &g, lr);
        }

        let val_loss = evaluate(&params, &val_frames, val_set, &obj, exec)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                detail: format!("validation loss {val_loss}"),
            });
        }
        let mean_train = train_loss / train_set.len() as f64;
        log::info!(
            "{} epoch {epoch}: lr {lr:.2e} train {mean_train:.4} val {val_loss:.4}",
            obj.variant
        );
        history.push(EpochRecord {
            train_loss: mean_train,
            val_loss,
        });

        if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch + 1, params.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience {
            break;
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    Ok(Checkpoint {
        params: best_params,
        normalization: norm,
        config: cfg.clone(),
        epoch: best_epoch,
        initial_val_loss,
        history,
    })
}
