//! Synthetic corpora with known behavior states.
//!
//! Each file is a run of stationary segments. Segment lengths are exponential
//! (clipped below) and each segment carries one of `n_behavior_states` latent
//! states. A frame is
//!
//! ```text
//! x_t = M s_t + nuisance_strength * u_f + noise
//! ```
//!
//! where `M` maps a one-hot state into feature space, `u_f` is constant within
//! file `f` and differs between files, and the noise is white Gaussian. A
//! frame's state is the state at the centre of its analysis window.
//!
//! Every file favours one dominant state. The binary session code
//! [`DOMINANT_LOW_CODE`] marks files whose dominant state is in the lower half
//! of the state range. Consecutive files are grouped into couples of
//! `group_size`; members of a couple alternate between the lower and upper
//! half, so every couple mixes both labels.
//!
//! `file_offset` shifts the global file index, so corpora generated with the
//! same seed and different offsets share the state map but have disjoint file
//! nuisances and ids.

pub mod bench;

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::sessions::{format_labels_csv, LabelRow};
use crate::exec::Exec;
use crate::features::io::{write_atomic, write_features, FEATURE_EXT};
use crate::features::{AudioBuffer, FrameSequence};
use crate::sampling::stream_seed;

pub use bench::{run_ordering, BenchConfig, OrderingRun};

pub const DOMINANT_LOW_CODE: &str = "dominant_low";
/// Shortest allowed stationary segment, in seconds.
pub const MIN_DWELL_S: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_files: usize,
    pub file_duration_s: f64,
    /// Mean stationary segment length.
    pub behavior_dwell_s: f64,
    pub n_behavior_states: usize,
    pub nuisance_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub dim: usize,
    pub window_s: f64,
    pub shift_s: f64,
    /// Per-dimension scale of the state map.
    pub state_scale: f64,
    /// Per-dimension scale of file nuisance vectors.
    pub nuisance_scale: f64,
    /// Probability that a segment takes the file's dominant state.
    pub dominance: f64,
    pub group_size: usize,
    pub file_offset: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_files: 20,
            file_duration_s: 90.0,
            behavior_dwell_s: 45.0,
            n_behavior_states: 4,
            nuisance_strength: 0.8,
            noise_sigma: 8.0,
            seed: 0,
            dim: 420,
            window_s: 20.0,
            shift_s: 1.0,
            state_scale: 1.0,
            nuisance_scale: 2.0,
            dominance: 0.8,
            group_size: 2,
            file_offset: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_files == 0 || self.dim == 0 || self.group_size == 0 {
            return bad("n_files, dim and group_size must be positive");
        }
        if self.n_behavior_states < 2 {
            return bad("need at least 2 behavior states");
        }
        if !(self.shift_s > 0.0 && self.window_s >= self.shift_s) {
            return bad("need 0 < shift_s <= window_s");
        }
        if self.file_duration_s < self.window_s {
            return bad("file_duration_s shorter than one analysis window");
        }
        if !(self.behavior_dwell_s > self.window_s) {
            return bad("behavior_dwell_s must exceed the analysis window");
        }
        if !(0.0..=1.0).contains(&self.nuisance_strength) || !(0.0..=1.0).contains(&self.dominance) {
            return bad("nuisance_strength and dominance must lie in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0 && self.state_scale >= 0.0 && self.nuisance_scale >= 0.0) {
            return bad("scales must be non-negative");
        }
        Ok(())
    }

    pub fn frames_per_file(&self) -> usize {
        ((self.file_duration_s - self.window_s) / self.shift_s + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFile {
    pub features: FrameSequence,
    pub group_id: String,
    pub dominant_state: usize,
    /// Ground-truth state of each frame.
    pub states: Vec<usize>,
    pub nuisance: Vec<f64>,
}

impl SynthFile {
    pub fn dominant_low(&self, n_states: usize) -> u8 {
        (self.dominant_state < n_states / 2) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub files: Vec<SynthFile>,
}

/// Dominant state of a file: member `m` of group `g` takes
/// `g mod half + (m mod 2) * half`, with `half = n_states / 2`.
pub fn dominant_state(global_index: usize, group_size: usize, n_states: usize) -> usize {
    let half = n_states / 2;
    let (g, m) = (global_index / group_size, global_index % group_size);
    (g + m / 2) % half + (m % 2) * half
}

pub fn file_id(global_index: usize) -> String {
    format!("synth_{global_index:04}")
}

/// `n_states x dim` map from one-hot state to feature space.
pub fn state_map(cfg: &SynthConfig) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, "", "state-map"));
    let normal = Normal::new(0.0, cfg.state_scale).expect("finite scale");
    Array2::from_shape_fn((cfg.n_behavior_states, cfg.dim), |_| normal.sample(&mut rng))
}

/// Segment boundaries (start times, seconds) and their states.
fn segments(cfg: &SynthConfig, dominant: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, usize)> {
    let dwell = Exp::new(1.0 / cfg.behavior_dwell_s).expect("positive dwell");
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < cfg.file_duration_s {
        let state = if rng.gen::<f64>() < cfg.dominance {
            dominant
        } else {
            let other = rng.gen_range(0..cfg.n_behavior_states - 1);
            if other >= dominant {
                other + 1
            } else {
                other
            }
        };
        out.push((t, state));
        t += dwell.sample(rng).max(MIN_DWELL_S);
    }
    out
}

fn state_at(segs: &[(f64, usize)], t: f64) -> usize {
    segs.iter().rev().find(|(start, _)| *start <= t).map_or(segs[0].1, |s| s.1)
}

fn generate_file(cfg: &SynthConfig, map: &Array2<f64>, local: usize) -> SynthFile {
    let global = cfg.file_offset + local;
    let id = file_id(global);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, &id, "synth"));
    let dominant = dominant_state(global, cfg.group_size, cfg.n_behavior_states);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let nuisance: Vec<f64> = (0..cfg.dim)
        .map(|_| cfg.nuisance_scale * unit.sample(&mut rng))
        .collect();
    let segs = segments(cfg, dominant, &mut rng);
    let n = cfg.frames_per_file();
    let states: Vec<usize> = (0..n)
        .map(|i| state_at(&segs, i as f64 * cfg.shift_s + cfg.window_s / 2.0))
        .collect();
    let mut data = Array2::zeros((n, cfg.dim));
    for (i, mut row) in data.outer_iter_mut().enumerate() {
        let mean = map.row(states[i]);
        for d in 0..cfg.dim {
            let noise = if cfg.noise_sigma > 0.0 {
                cfg.noise_sigma * unit.sample(&mut rng)
            } else {
                0.0
            };
            row[d] = mean[d] + cfg.nuisance_strength * nuisance[d] + noise;
        }
    }
    SynthFile {
        features: FrameSequence::new(id, cfg.window_s, cfg.shift_s, data),
        group_id: format!("couple_{:03}", global / cfg.group_size),
        dominant_state: dominant,
        states,
        nuisance,
    }
}

/// Deterministic in the config; files are generated independently from
/// per-file streams.
pub fn generate(cfg: &SynthConfig, exec: &Exec) -> Result<SynthCorpus> {
    cfg.validate()?;
    let map = state_map(cfg);
    let files = exec.map_range(cfg.n_files, |f| generate_file(cfg, &map, f));
    Ok(SynthCorpus {
        config: cfg.clone(),
        files,
    })
}

impl SynthCorpus {
    pub fn sequences(&self) -> Vec<FrameSequence> {
        self.files.iter().map(|f| f.features.clone()).collect()
    }

    pub fn label_rows(&self) -> Vec<LabelRow> {
        self.files
            .iter()
            .map(|f| LabelRow {
                session_id: f.features.source_id.clone(),
                group_id: f.group_id.clone(),
                code: DOMINANT_LOW_CODE.into(),
                label: f.dominant_low(self.config.n_behavior_states),
            })
            .collect()
    }

    /// Fraction of (frame, neighbor within `k` frames) pairs that share a
    /// state, over all files.
    pub fn stationarity(&self, k: usize) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for f in &self.files {
            let s = &f.states;
            for i in 0..s.len() {
                for j in i.saturating_sub(k)..=(i + k).min(s.len() - 1) {
                    if j != i {
                        total += 1;
                        same += (s[i] == s[j]) as usize;
                    }
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            same as f64 / total as f64
        }
    }

    pub fn states_csv(&self) -> String {
        let mut s = String::from("session_id,frame,t_start_s,state\n");
        for f in &self.files {
            for (i, st) in f.states.iter().enumerate() {
                s.push_str(&format!(
                    "{},{i},{},{st}\n",
                    f.features.source_id,
                    f.features.t_start_s(i)
                ));
            }
        }
        s
    }

    /// Feature files, `labels.csv` and `states.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            let path = dir.join(format!("{}.{FEATURE_EXT}", f.features.source_id));
            write_features(&path, &f.features)?;
        }
        write_atomic(&dir.join("labels.csv"), format_labels_csv(&self.label_rows()).as_bytes())?;
        write_atomic(&dir.join("states.csv"), self.states_csv().as_bytes())?;
        Ok(())
    }
}

/// Audio rendition of a state sequence: a harmonic tone whose pitch and level
/// depend on the state, shifted per file by a speaker-like pitch offset.
pub fn render_audio(
    states_per_second: &[usize],
    file_pitch_offset_hz: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<AudioBuffer> {
    if states_per_second.is_empty() {
        return Err(Error::InvalidInput("no states to render".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate_hz as f64;
    let n = states_per_second.len() * sample_rate_hz as usize;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let s = states_per_second[i / sample_rate_hz as usize] as f64;
        // slow vibrato keeps the contour from being perfectly flat
        let f0 = 110.0 + 35.0 * s + file_pitch_offset_hz + 3.0 * (2.0 * std::f64::consts::PI * 0.5 * t).sin();
        let level = 0.08 + 0.05 * s;
        phase += 2.0 * std::f64::consts::PI * f0 / sr;
        let tone = phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin();
        out.push(level * tone + 0.002 * rng.gen_range(-1.0..1.0));
    }
    AudioBuffer::new(out, sample_rate_hz)
}

/// Per-second state track of a file, with the same segment model as
/// [`generate`].
pub fn state_track(cfg: &SynthConfig, local: usize) -> Result<Vec<usize>> {
    cfg.validate()?;
    let global = cfg.file_offset + local;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, &file_id(global), "audio"));
    let segs = segments(
        cfg,
        dominant_state(global, cfg.group_size, cfg.n_behavior_states),
        &mut rng,
    );
    Ok((0..cfg.file_duration_s.floor() as usize)
        .map(|t| state_at(&segs, t as f64 + 0.5))
        .collect())
}
