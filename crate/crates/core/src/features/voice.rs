//! Pitch, jitter and shimmer.
//!
//! Pitch comes from the normalized short-time autocorrelation of each 25 ms
//! frame. Jitter and shimmer are cycle-to-cycle perturbations measured on
//! glottal-cycle peaks picked across whole voiced runs, then attributed back
//! to the frames those cycles overlap.

/// Minimum normalized autocorrelation for a frame to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.5;
/// Frames quieter than this RMS are always unvoiced.
const SILENCE_RMS: f64 = 1e-4;
/// Among autocorrelation peaks, the shortest lag within this fraction of the
/// strongest one wins (suppresses octave-down errors).
const OCTAVE_TOLERANCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchEstimate {
    pub f0_hz: f64,
    pub period_samples: f64,
    pub strength: f64,
}

/// Estimates F0 of one frame; `None` when the frame is unvoiced.
pub fn estimate_pitch(frame: &[f64], sample_rate: f64, min_hz: f64, max_hz: f64) -> Option<PitchEstimate> {
    let n = frame.len();
    let mean = frame.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms < SILENCE_RMS {
        return None;
    }

    let min_lag = ((sample_rate / max_hz).floor() as usize).max(2);
    // keep at least a third of the frame overlapping at the longest lag
    let max_lag = ((sample_rate / min_hz).ceil() as usize).min(n * 2 / 3);
    if max_lag <= min_lag + 1 {
        return None;
    }

    // r[k] holds the correlation at lag min_lag - 1 + k
    let lags = (min_lag - 1)..=(max_lag + 1);
    let r: Vec<f64> = lags.clone().map(|lag| normalized_autocorr(&x, lag)).collect();

    let interior = 1..r.len() - 1;
    let best = interior
        .clone()
        .map(|k| r[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    let k = interior
        .filter(|&k| r[k] >= r[k - 1] && r[k] >= r[k + 1])
        .find(|&k| r[k] >= OCTAVE_TOLERANCE * best)?;

    let (y0, y1, y2) = (r[k - 1], r[k], r[k + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let period = (min_lag - 1 + k) as f64 + delta;
    Some(PitchEstimate {
        f0_hz: sample_rate / period,
        period_samples: period,
        strength: y1,
    })
}

fn normalized_autocorr(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let mut num = 0.0;
    let mut ea = 0.0;
    let mut eb = 0.0;
    for (&u, &v) in a.iter().zip(b) {
        num += u * v;
        ea += u * u;
        eb += v * v;
    }
    let den = (ea * eb).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One glottal-cycle peak.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CyclePeak {
    position: f64,
    amplitude: f64,
}

/// Per-frame local jitter and shimmer (relative, dimensionless).
///
/// `periods[i]` is the pitch period of frame `i` in samples, or `None` when the
/// frame is unvoiced; unvoiced frames get 0 for both measures.
pub fn jitter_shimmer(
    samples: &[f64],
    periods: &[Option<f64>],
    frame_len: usize,
    hop: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut jitter = vec![0.0; periods.len()];
    let mut shimmer = vec![0.0; periods.len()];

    let mut i = 0;
    while i < periods.len() {
        if periods[i].is_none() {
            i += 1;
            continue;
        }
        let start = i;
        while i < periods.len() && periods[i].is_some() {
            i += 1;
        }
        let run = start..i;
        let span_start = run.start * hop;
        let span_end = ((run.end - 1) * hop + frame_len).min(samples.len());
        let peaks = pick_cycle_peaks(samples, span_start, span_end, |pos| {
            let f = ((pos.saturating_sub(frame_len / 2)) / hop).clamp(run.start, run.end - 1);
            periods[f].unwrap_or(0.0)
        });

        for f in run {
            let period = periods[f].unwrap_or(0.0);
            // at least four periods of context, centred on the frame
            let centre = (f * hop + frame_len / 2) as f64;
            let half = (frame_len as f64 / 2.0).max(2.0 * period);
            let (lo, hi) = (centre - half, centre + half);
            let local: Vec<CyclePeak> = peaks
                .iter()
                .copied()
                .filter(|p| p.position >= lo && p.position <= hi)
                .collect();
            if local.len() < 3 {
                continue;
            }
            let periods_local: Vec<f64> = local
                .windows(2)
                .map(|w| w[1].position - w[0].position)
                .collect();
            jitter[f] = mean_abs_diff(&periods_local) / mean(&periods_local);
            let amps: Vec<f64> = local.iter().map(|p| p.amplitude).collect();
            let mean_amp = mean(&amps);
            if mean_amp > 0.0 {
                shimmer[f] = mean_abs_diff(&amps) / mean_amp;
            }
        }
    }
    (jitter, shimmer)
}

fn pick_cycle_peaks(
    samples: &[f64],
    start: usize,
    end: usize,
    period_at: impl Fn(usize) -> f64,
) -> Vec<CyclePeak> {
    let mut peaks = Vec::new();
    let first_period = period_at(start);
    if first_period < 2.0 || start >= end {
        return peaks;
    }
    let mut lo = start;
    let mut hi = (start + first_period.ceil() as usize).min(end);
    while hi > lo + 1 {
        let idx = (lo..hi)
            .max_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(b.cmp(&a)))
            .unwrap();
        peaks.push(refine_peak(samples, idx));
        let period = period_at(idx);
        if period < 2.0 {
            break;
        }
        lo = idx + (0.75 * period).round() as usize;
        hi = (idx + (1.25 * period).round() as usize + 1).min(end);
    }
    peaks
}

fn refine_peak(samples: &[f64], idx: usize) -> CyclePeak {
    if idx == 0 || idx + 1 >= samples.len() {
        return CyclePeak {
            position: idx as f64,
            amplitude: samples[idx],
        };
    }
    let (y0, y1, y2) = (samples[idx - 1], samples[idx], samples[idx + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() < 1e-15 {
        return CyclePeak {
            position: idx as f64,
            amplitude: y1,
        };
    }
    let delta = (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5);
    CyclePeak {
        position: idx as f64 + delta,
        amplitude: y1 - 0.25 * (y0 - y2) * delta,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_abs_diff(v: &[f64]) -> f64 {
    let n = v.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, n: usize, sr: f64) -> Vec<f64> {
        (0..n).map(|i| 0.6 * (2.0 * PI * freq * i as f64 / sr).sin()).collect()
    }

    #[test]
    fn pitch_of_pure_tones() {
        for f in [80.0, 120.0, 220.0, 440.0] {
            let est = estimate_pitch(&tone(f, 400, 16000.0), 16000.0, 60.0, 500.0).unwrap();
            assert!((est.f0_hz - f).abs() / f < 0.01, "{f}: {}", est.f0_hz);
        }
    }

    #[test]
    fn silence_and_noise_are_unvoiced() {
        assert!(estimate_pitch(&[0.0; 400], 16000.0, 60.0, 500.0).is_none());
        // deterministic pseudo-noise
        let mut s = 12345u64;
        let noise: Vec<f64> = (0..400)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
            })
            .collect();
        assert!(estimate_pitch(&noise, 16000.0, 60.0, 500.0).is_none());
    }

    #[test]
    fn steady_tone_has_near_zero_perturbation() {
        let x = tone(200.0, 16000, 16000.0);
        let frames = (16000 - 400) / 160 + 1;
        let periods = vec![Some(80.0); frames];
        let (j, s) = jitter_shimmer(&x, &periods, 400, 160);
        assert!(j.iter().all(|&v| v < 1e-3));
        assert!(s.iter().all(|&v| v < 1e-3));
    }

    #[test]
    fn alternating_periods_produce_jitter() {
        // cycles alternating 78 / 82 samples: local jitter = 4 / 80 = 0.05
        let mut x = Vec::new();
        let mut k = 0;
        while x.len() < 16000 {
            let len = if k % 2 == 0 { 78 } else { 82 };
            // narrow bump 10 samples into every cycle
            x.extend((0..len).map(|i| (-((i as f64 - 10.0) / 3.0).powi(2)).exp()));
            k += 1;
        }
        x.truncate(16000);
        let frames = (16000 - 400) / 160 + 1;
        let (j, _) = jitter_shimmer(&x, &vec![Some(80.0); frames], 400, 160);
        let mid = j[frames / 2];
        assert!((mid - 0.05).abs() < 0.01, "{mid}");
    }

    #[test]
    fn unvoiced_frames_get_zero() {
        let x = tone(200.0, 4000, 16000.0);
        let (j, s) = jitter_shimmer(&x, &[None, None, None], 400, 160);
        assert_eq!(j, vec![0.0; 3]);
        assert_eq!(s, vec![0.0; 3]);
    }
}
