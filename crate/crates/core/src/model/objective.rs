//! Per-variant training objectives and their exact gradients.
//!
//! All branches of a tuple share one set of weights, so the branch inputs are
//! stacked into a single matrix and pushed through the network together:
//!
//! | variant        | stacked input  | reconstruction target | triplet |
//! |----------------|----------------|-----------------------|---------|
//! | DCN            | `[a; p]`       | `[p; a]`              | no      |
//! | triplet        | `[a; p; n]`    | none (encoder only)   | yes     |
//! | TE-autoencoder | `[a; p; n]`    | `[a; p; n]`           | yes     |
//! | TE-DCN         | `[a; p; n]`    | `[p; a; n_p]`         | yes     |
//!
//! The L2 penalty covers weight matrices only (not biases or PReLU slopes),
//! and only the encoder for the triplet-only variant, which has no decoder.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::loss::{reconstruction_loss, triplet_loss, triplet_loss_grad};
use super::network::{Gradients, NetworkParams, Variant};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Tuples per gradient chunk. Fixed so the summation order of chunk
/// gradients, and therefore every result, is independent of the job count.
pub const GRADIENT_CHUNK: usize = 64;

/// Frames of a batch of tuples, one tuple per row index.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleBatch {
    pub anchor: Array2<f64>,
    pub positive: Array2<f64>,
    pub negative: Array2<f64>,
    pub negative_context: Array2<f64>,
}

impl TupleBatch {
    pub fn len(&self) -> usize {
        self.anchor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor.nrows() == 0
    }

    fn slice(&self, rows: std::ops::Range<usize>) -> TupleBatch {
        let r = s![rows, ..];
        TupleBatch {
            anchor: self.anchor.slice(r).to_owned(),
            positive: self.positive.slice(r).to_owned(),
            negative: self.negative.slice(r).to_owned(),
            negative_context: self.negative_context.slice(r).to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub variant: Variant,
    pub margin: f64,
    pub l2_weight: f64,
    /// Multiplier on the triplet term (1 in normal training).
    pub triplet_weight: f64,
    /// Whether TE-DCN reconstructs `n -> n_p` (true in normal training).
    pub negative_reconstruction: bool,
}

impl Objective {
    pub fn new(variant: Variant, margin: f64, l2_weight: f64) -> Self {
        Self {
            variant,
            margin,
            l2_weight,
            triplet_weight: 1.0,
            negative_reconstruction: true,
        }
    }

    fn l2_layers(&self, params: &NetworkParams) -> usize {
        if self.variant.uses_decoder() {
            params.layers.len()
        } else {
            params.encoder_len()
        }
    }
}

/// `lambda * sum ||W||^2` over the weight matrices in scope.
pub fn l2_penalty(params: &NetworkParams, obj: &Objective) -> f64 {
    obj.l2_weight
        * params.layers[..obj.l2_layers(params)]
            .iter()
            .map(|l| l.weight.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
}

fn add_l2_gradient(params: &NetworkParams, obj: &Objective, grads: &mut Gradients) {
    for (g, l) in grads.layers[..obj.l2_layers(params)]
        .iter_mut()
        .zip(&params.layers)
    {
        g.weight.scaled_add(2.0 * obj.l2_weight, &l.weight);
    }
}

struct Stacked {
    input: Array2<f64>,
    target: Option<Array2<f64>>,
    /// Rows of `target` that contribute to the loss.
    target_rows: usize,
    triplet: bool,
}

fn stack(batch: &TupleBatch, obj: &Objective) -> Stacked {
    let cat = |parts: &[ArrayView2<'_, f64>]| concatenate(Axis(0), parts).expect("equal widths");
    let (a, p, n, np) = (
        batch.anchor.view(),
        batch.positive.view(),
        batch.negative.view(),
        batch.negative_context.view(),
    );
    let b = batch.len();
    match obj.variant {
        Variant::Dcn => Stacked {
            input: cat(&[a, p]),
            target: Some(cat(&[p, a])),
            target_rows: 2 * b,
            triplet: false,
        },
        Variant::TripletOnly => Stacked {
            input: cat(&[a, p, n]),
            target: None,
            target_rows: 0,
            triplet: true,
        },
        Variant::TeAutoencoder => {
            let x = cat(&[a, p, n]);
            Stacked {
                target: Some(x.clone()),
                input: x,
                target_rows: 3 * b,
                triplet: true,
            }
        }
        Variant::TeDcn => Stacked {
            input: cat(&[a, p, n]),
            target: Some(cat(&[p, a, np])),
            target_rows: if obj.negative_reconstruction { 3 * b } else { 2 * b },
            triplet: true,
        },
    }
}

/// Data terms only (reconstruction + weighted triplet) and their gradient.
fn data_loss_and_gradient(
    params: &NetworkParams,
    batch: &TupleBatch,
    obj: &Objective,
    grads: &mut Gradients,
) -> Result<f64> {
    let b = batch.len();
    let st = stack(batch, obj);
    let cache = params.forward(st.input.view(), st.target.is_some())?;
    let mut loss = 0.0;

    let d_output = match (&cache.output, &st.target) {
        (Some(out), Some(target)) => {
            let rows = s![..st.target_rows, ..];
            loss += reconstruction_loss(out.slice(rows), target.slice(rows))?;
            let mut d = out - target;
            d.mapv_inplace(|v| 2.0 * v);
            d.slice_mut(s![st.target_rows.., ..]).fill(0.0);
            Some(d)
        }
        _ => None,
    };

    let d_embedding = if st.triplet && obj.triplet_weight != 0.0 {
        let e = &cache.embedding;
        let (ea, ep, en) = (
            e.slice(s![..b, ..]),
            e.slice(s![b..2 * b, ..]),
            e.slice(s![2 * b..3 * b, ..]),
        );
        let (t, ga, gp, gn) = triplet_loss_grad(ea, ep, en, obj.margin);
        loss += obj.triplet_weight * t;
        let mut d = concatenate(Axis(0), &[ga.view(), gp.view(), gn.view()]).expect("same widths");
        d.mapv_inplace(|v| obj.triplet_weight * v);
        Some(d)
    } else {
        None
    };

    params.backward(&cache, d_output.as_ref(), d_embedding.as_ref(), grads);
    Ok(loss)
}

/// Total objective of one batch: data terms plus the L2 penalty.
pub fn total_loss(params: &NetworkParams, batch: &TupleBatch, obj: &Objective) -> Result<f64> {
    Ok(data_loss(params, batch, obj)? + l2_penalty(params, obj))
}

/// Data terms only, forward pass only.
pub fn data_loss(params: &NetworkParams, batch: &TupleBatch, obj: &Objective) -> Result<f64> {
    let b = batch.len();
    let st = stack(batch, obj);
    let cache = params.forward(st.input.view(), st.target.is_some())?;
    let mut loss = 0.0;
    if let (Some(out), Some(target)) = (&cache.output, &st.target) {
        let rows = s![..st.target_rows, ..];
        loss += reconstruction_loss(out.slice(rows), target.slice(rows))?;
    }
    if st.triplet && obj.triplet_weight != 0.0 {
        let e = &cache.embedding;
        loss += obj.triplet_weight
            * triplet_loss(
                e.slice(s![..b, ..]),
                e.slice(s![b..2 * b, ..]),
                e.slice(s![2 * b..3 * b, ..]),
                obj.margin,
            )?;
    }
    Ok(loss)
}

/// Total loss and its exact gradient for one batch, in a single pass.
pub fn compute_gradients(
    params: &NetworkParams,
    batch: &TupleBatch,
    obj: &Objective,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(params);
    let loss = data_loss_and_gradient(params, batch, obj, &mut grads)?;
    add_l2_gradient(params, obj, &mut grads);
    Ok((loss + l2_penalty(params, obj), grads))
}

/// Same result as [`compute_gradients`] up to summation order, computed over
/// fixed-size chunks that may run in parallel.
pub fn batch_gradients(
    params: &NetworkParams,
    batch: &TupleBatch,
    obj: &Objective,
    exec: &Exec,
) -> Result<(f64, Gradients)> {
    let n_chunks = batch.len().div_ceil(GRADIENT_CHUNK).max(1);
    let parts = exec.map_range(n_chunks, |c| -> Result<(f64, Gradients)> {
        let rows = c * GRADIENT_CHUNK..((c + 1) * GRADIENT_CHUNK).min(batch.len());
        let mut g = Gradients::zeros_like(params);
        let loss = data_loss_and_gradient(params, &batch.slice(rows), obj, &mut g)?;
        Ok((loss, g))
    });
    let mut total = 0.0;
    let mut grads: Option<Gradients> = None;
    for part in parts {
        let (l, g) = part?;
        total += l;
        match &mut grads {
            None => grads = Some(g),
            Some(acc) => acc.add_assign(&g),
        }
    }
    let mut grads = grads.unwrap_or_else(|| Gradients::zeros_like(params));
    add_l2_gradient(params, obj, &mut grads);
    let total = total + l2_penalty(params, obj);
    if !total.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite batch loss {total}")));
    }
    Ok((total, grads))
}
