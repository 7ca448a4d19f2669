use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::audio::AudioBuffer;
use super::spectral::{dct2, lpc, MelBank, SpectrumAnalyzer};
use super::voice::{estimate_pitch, jitter_shimmer};
use crate::error::{Error, Result};

/// Intensity of digital silence, in dB.
pub const INTENSITY_FLOOR_DB: f64 = -100.0;

/// Low-level descriptor configuration. Defaults give the 70-column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LldConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mfcc: usize,
    pub n_mfb: usize,
    pub n_lpc: usize,
    /// Mel filters feeding the cepstrum (independent of `n_mfb`).
    pub n_mel_for_mfcc: usize,
    pub pitch_min_hz: f64,
    pub pitch_max_hz: f64,
    pub pre_emphasis: f64,
    /// All input is resampled to this rate first.
    pub sample_rate_hz: u32,
}

impl Default for LldConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            n_mfcc: 15,
            n_mfb: 8,
            n_lpc: 8,
            n_mel_for_mfcc: 26,
            pitch_min_hz: 60.0,
            pitch_max_hz: 500.0,
            pre_emphasis: 0.97,
            sample_rate_hz: 16_000,
        }
    }
}

impl LldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_ms > self.hop_ms && self.hop_ms > 0.0) {
            return Err(Error::Config(format!(
                "need frame_len_ms > hop_ms > 0 (got {} / {})",
                self.frame_len_ms, self.hop_ms
            )));
        }
        if self.sample_rate_hz < 8000 {
            return Err(Error::Config("sample_rate_hz must be >= 8000".into()));
        }
        if self.n_mfcc == 0 || self.n_mfcc >= self.n_mel_for_mfcc {
            return Err(Error::Config("need 0 < n_mfcc < n_mel_for_mfcc".into()));
        }
        if !(self.pitch_min_hz > 0.0 && self.pitch_max_hz > self.pitch_min_hz) {
            return Err(Error::Config("invalid pitch search range".into()));
        }
        Ok(())
    }

    /// Descriptors before deltas: pitch, intensity, MFCC, MFB, LPC, jitter, shimmer.
    pub fn n_base(&self) -> usize {
        2 + self.n_mfcc + self.n_mfb + self.n_lpc + 2
    }

    pub fn n_lld(&self) -> usize {
        2 * self.n_base()
    }

    pub fn frame_len_samples(&self) -> usize {
        (self.frame_len_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    /// Column names in storage order; deltas carry a `d_` prefix.
    pub fn column_names(&self) -> Vec<String> {
        let mut base = vec!["pitch".to_string(), "intensity".to_string()];
        base.extend((1..=self.n_mfcc).map(|i| format!("mfcc_{i}")));
        base.extend((1..=self.n_mfb).map(|i| format!("mfb_{i}")));
        base.extend((1..=self.n_lpc).map(|i| format!("lpc_{i}")));
        base.push("jitter".into());
        base.push("shimmer".into());
        let deltas: Vec<String> = base.iter().map(|n| format!("d_{n}")).collect();
        base.extend(deltas);
        base
    }
}

/// Frame-level descriptors: one row per 25 ms frame, base columns then deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct LldSequence {
    pub frames: Array2<f64>,
    pub names: Vec<String>,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
}

impl LldSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    /// Span of audio covered by the frames, in seconds.
    pub fn duration_s(&self) -> f64 {
        if self.n_frames() == 0 {
            return 0.0;
        }
        ((self.n_frames() - 1) as f64 * self.hop_ms + self.frame_len_ms) / 1000.0
    }
}

/// Extracts the descriptor sequence. Audio at another rate is resampled first.
pub fn compute_lld_sequence(audio: &AudioBuffer, cfg: &LldConfig) -> Result<LldSequence> {
    cfg.validate()?;
    if audio.sample_rate_hz() < 8000 {
        return Err(Error::InvalidInput(format!(
            "sample rate {} Hz is below 8000 Hz",
            audio.sample_rate_hz()
        )));
    }
    let audio = audio.resample(cfg.sample_rate_hz)?;
    let x = audio.samples();
    let sr = cfg.sample_rate_hz as f64;
    let frame_len = cfg.frame_len_samples();
    let hop = cfg.hop_samples();
    if x.len() < frame_len {
        return Err(Error::InsufficientAudio(format!(
            "{} samples, need at least one {} ms frame ({frame_len} samples)",
            x.len(),
            cfg.frame_len_ms
        )));
    }
    let n_frames = (x.len() - frame_len) / hop + 1;

    let analyzer = SpectrumAnalyzer::new(frame_len, cfg.pre_emphasis);
    let mfcc_bank = MelBank::new(cfg.n_mel_for_mfcc, analyzer.n_fft(), sr, 20.0, sr / 2.0);
    let mfb_bank = MelBank::new(cfg.n_mfb, analyzer.n_fft(), sr, 20.0, sr / 2.0);

    let n_base = cfg.n_base();
    let mut base = Array2::<f64>::zeros((n_frames, n_base));
    let mut periods = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let frame = &x[t * hop..t * hop + frame_len];
        let mut row = base.row_mut(t);

        let pitch = estimate_pitch(frame, sr, cfg.pitch_min_hz, cfg.pitch_max_hz);
        row[0] = pitch.map_or(0.0, |p| p.f0_hz);
        periods.push(pitch.map(|p| p.period_samples));

        let energy = frame.iter().map(|v| v * v).sum::<f64>() / frame_len as f64;
        row[1] = if energy > 0.0 {
            (10.0 * energy.log10()).max(INTENSITY_FLOOR_DB)
        } else {
            INTENSITY_FLOOR_DB
        };

        let shaped = analyzer.shape(frame);
        let power = analyzer.power(&shaped);
        let mut col = 2;
        for c in dct2(&mfcc_bank.log_energies(&power), 1, cfg.n_mfcc) {
            row[col] = c;
            col += 1;
        }
        for e in mfb_bank.log_energies(&power) {
            row[col] = e;
            col += 1;
        }
        for a in lpc(&shaped, cfg.n_lpc) {
            row[col] = a;
            col += 1;
        }
    }

    let (jitter, shimmer) = jitter_shimmer(x, &periods, frame_len, hop);
    for t in 0..n_frames {
        base[[t, n_base - 2]] = jitter[t];
        base[[t, n_base - 1]] = shimmer[t];
    }

    let mut frames = Array2::<f64>::zeros((n_frames, 2 * n_base));
    frames.slice_mut(ndarray::s![.., ..n_base]).assign(&base);
    let d = deltas(&base);
    frames.slice_mut(ndarray::s![.., n_base..]).assign(&d);

    if frames.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite descriptor value".into()));
    }
    Ok(LldSequence {
        frames,
        names: cfg.column_names(),
        frame_len_ms: cfg.frame_len_ms,
        hop_ms: cfg.hop_ms,
    })
}

/// Regression deltas over +-2 frames with edge replication:
/// `d_t = (c_{t+1} - c_{t-1} + 2 (c_{t+2} - c_{t-2})) / 10`.
pub fn deltas(base: &Array2<f64>) -> Array2<f64> {
    let n = base.nrows();
    let mut out = Array2::<f64>::zeros(base.raw_dim());
    if n == 0 {
        return out;
    }
    let at = |t: isize| t.clamp(0, n as isize - 1) as usize;
    for t in 0..n as isize {
        let (m2, m1, p1, p2) = (at(t - 2), at(t - 1), at(t + 1), at(t + 2));
        for c in 0..base.ncols() {
            out[[t as usize, c]] = (base[[p1, c]] - base[[m1, c]]
                + 2.0 * (base[[p2, c]] - base[[m2, c]]))
                / 10.0;
        }
    }
    out
}
