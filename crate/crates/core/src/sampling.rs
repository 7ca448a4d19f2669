//! Training-pair and triplet sampling under behavioral stationarity.
//!
//! Frames within `k` seconds of each other are assumed to share behavior, so
//! they form (anchor, context) pairs. Negatives are a neighboring pair drawn
//! from a different source file. Every file draws from its own RNG stream,
//! `file_seed = sha256(seed, source_id, purpose)`, so results do not depend on
//! the order or parallelism with which files are processed.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FrameSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Maximum anchor-to-context shift, in seconds.
    pub k_seconds: f64,
    /// Context frames drawn per anchor.
    pub n_context: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k_seconds: 6.0,
            n_context: 4,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_seconds > 0.0) {
            return Err(Error::Config("k_seconds must be positive".into()));
        }
        if self.n_context == 0 {
            return Err(Error::Config("n_context must be >= 1".into()));
        }
        Ok(())
    }

    /// Maximum shift in frame indices: `round(k_seconds / shift_s)`, at least 1.
    pub fn k_frames(&self, shift_s: f64) -> usize {
        ((self.k_seconds / shift_s).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextPair {
    pub source_id: String,
    pub anchor: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TripletTuple {
    pub anchor_source: String,
    pub anchor: usize,
    pub positive: usize,
    pub negative_source: String,
    pub negative: usize,
    pub negative_context: usize,
}

/// A file left out of sampling, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipRecord {
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletSample {
    pub tuples: Vec<TripletTuple>,
    pub skipped: Vec<SkipRecord>,
}

pub fn stream_seed(seed: u64, source_id: &str, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((source_id.len() as u64).to_le_bytes());
    h.update(source_id.as_bytes());
    h.update(purpose.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

fn neighbors(i: usize, k: usize, len: usize) -> Vec<usize> {
    let lo = i.saturating_sub(k);
    let hi = (i + k).min(len - 1);
    (lo..=hi).filter(|&j| j != i).collect()
}

fn check_length(seq: &FrameSequence, k: usize) -> Result<()> {
    if seq.len() <= k + 1 {
        return Err(Error::InvalidInput(format!(
            "{}: {} frames, need more than {} for k = {k}",
            seq.source_id,
            seq.len(),
            k + 1
        )));
    }
    Ok(())
}

/// `n_context` distinct targets per anchor, drawn uniformly from the anchor's
/// clipped `+-k` neighborhood.
pub fn sample_context_pairs(seq: &FrameSequence, cfg: &SamplerConfig) -> Result<Vec<ContextPair>> {
    cfg.validate()?;
    let k = cfg.k_frames(seq.shift_s);
    check_length(seq, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, &seq.source_id, "context"));
    let mut pairs = Vec::with_capacity(seq.len() * cfg.n_context);
    for anchor in 0..seq.len() {
        let cand = neighbors(anchor, k, seq.len());
        let take = cfg.n_context.min(cand.len());
        for idx in index::sample(&mut rng, cand.len(), take) {
            pairs.push(ContextPair {
                source_id: seq.source_id.clone(),
                anchor,
                target: cand[idx],
            });
        }
    }
    Ok(pairs)
}

/// One tuple per context pair of every file; the negative pair comes from a
/// uniformly chosen other file and obeys the same `+-k` constraint.
pub fn sample_triplet_tuples(
    corpus: &[FrameSequence],
    cfg: &SamplerConfig,
    exec: &Exec,
) -> Result<TripletSample> {
    cfg.validate()?;
    let mut skipped = Vec::new();
    let mut eligible = Vec::new();
    for (i, seq) in corpus.iter().enumerate() {
        match check_length(seq, cfg.k_frames(seq.shift_s)) {
            Ok(()) => eligible.push(i),
            Err(e) => {
                log::warn!("skipping {}: {e}", seq.source_id);
                skipped.push(SkipRecord {
                    source_id: seq.source_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if eligible.len() < 2 {
        return Err(Error::TooFewSources(eligible.len()));
    }

    let per_file = exec.map(&eligible, |&a_idx| -> Result<Vec<TripletTuple>> {
        let seq = &corpus[a_idx];
        let pairs = sample_context_pairs(seq, cfg)?;
        let others: Vec<usize> = eligible.iter().copied().filter(|&j| j != a_idx).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, &seq.source_id, "negative"));
        Ok(pairs
            .into_iter()
            .map(|p| {
                let neg = &corpus[others[rng.gen_range(0..others.len())]];
                let n = rng.gen_range(0..neg.len());
                let cand = neighbors(n, cfg.k_frames(neg.shift_s), neg.len());
                let np = cand[rng.gen_range(0..cand.len())];
                TripletTuple {
                    anchor_source: p.source_id,
                    anchor: p.anchor,
                    positive: p.target,
                    negative_source: neg.source_id.clone(),
                    negative: n,
                    negative_context: np,
                }
            })
            .collect())
    });
    let mut tuples = Vec::new();
    for r in per_file {
        tuples.extend(r?);
    }
    Ok(TripletSample { tuples, skipped })
}

/// One tuple per line: `A_id a p B_id n np`.
pub fn format_tuple_manifest(tuples: &[TripletTuple]) -> String {
    let mut out = String::with_capacity(tuples.len() * 32);
    for t in tuples {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            t.anchor_source, t.anchor, t.positive, t.negative_source, t.negative, t.negative_context
        );
    }
    out
}

pub fn parse_tuple_manifest(text: &str) -> Result<Vec<TripletTuple>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidInput(format!("tuple manifest line {}: {line:?}", n + 1));
            if f.len() != 6 {
                return Err(bad());
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
            Ok(TripletTuple {
                anchor_source: f[0].to_string(),
                anchor: idx(f[1])?,
                positive: idx(f[2])?,
                negative_source: f[3].to_string(),
                negative: idx(f[4])?,
                negative_context: idx(f[5])?,
            })
        })
        .collect()
}
