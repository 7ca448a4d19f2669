//! Spectral-envelope descriptors: MFCC, log mel-band energies and LPC.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, stored densely over FFT bins.
#[derive(Debug, Clone)]
pub struct MelBank {
    weights: Vec<Vec<f64>>,
}

impl MelBank {
    pub fn new(n_filters: usize, n_fft: usize, sample_rate: f64, low_hz: f64, high_hz: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let weights = (0..n_filters)
            .map(|m| {
                let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * sample_rate / n_fft as f64;
                        if f <= left || f >= right {
                            0.0
                        } else if f <= centre {
                            (f - left) / (centre - left)
                        } else {
                            (right - f) / (right - centre)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Natural-log band energies of a power spectrum.
    pub fn log_energies(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(power).map(|(a, b)| a * b).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect()
    }
}

/// Orthonormal DCT-II of `input`, keeping coefficients `first..first + count`.
pub fn dct2(input: &[f64], first: usize, count: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (first..first + count)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Linear-prediction coefficients `a_1..a_order` of `A(z) = 1 + sum a_k z^-k`
/// by the autocorrelation method and the Levinson-Durbin recursion.
/// A silent frame yields all zeros.
pub fn lpc(frame: &[f64], order: usize) -> Vec<f64> {
    let r: Vec<f64> = (0..=order)
        .map(|lag| {
            frame[..frame.len().saturating_sub(lag)]
                .iter()
                .zip(&frame[lag.min(frame.len())..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    if r[0] <= 1e-12 {
        return vec![0.0; order];
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 1e-12 * r[0] {
            break;
        }
    }
    a[1..].to_vec()
}

/// Windowed power-spectrum analyzer for fixed-length frames.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    n_fft: usize,
    pre_emphasis: f64,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("n_fft", &self.n_fft)
            .field("frame_len", &self.window.len())
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, pre_emphasis: f64) -> Self {
        let n_fft = frame_len.next_power_of_two();
        let window = hamming(frame_len);
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Self {
            fft,
            window,
            n_fft,
            pre_emphasis,
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    /// Pre-emphasized, Hamming-windowed copy of a frame.
    pub fn shape(&self, frame: &[f64]) -> Vec<f64> {
        let mut prev = frame.first().copied().unwrap_or(0.0);
        frame
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| {
                let y = x - self.pre_emphasis * prev;
                prev = x;
                y * w
            })
            .collect()
    }

    /// Power spectrum (bins `0..=n_fft/2`) of an already-shaped frame.
    pub fn power(&self, shaped: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = shaped
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.n_fft)
            .collect();
        self.fft.process(&mut buf);
        buf[..=self.n_fft / 2].iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let c = dct2(&[2.0; 8], 0, 4);
        assert!((c[0] - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lpc_recovers_ar1_process() {
        // x[n] = 0.9 x[n-1] + e[n]  =>  a_1 ~ -0.9
        let mut s = 7u64;
        let mut x = vec![0.0f64; 4000];
        for n in 1..x.len() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let e = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            x[n] = 0.9 * x[n - 1] + e;
        }
        let a = lpc(&x, 4);
        assert!((a[0] + 0.9).abs() < 0.05, "{a:?}");
        assert!(a[1..].iter().all(|v| v.abs() < 0.08), "{a:?}");
    }

    #[test]
    fn lpc_of_silence_is_zero() {
        assert_eq!(lpc(&[0.0; 400], 8), vec![0.0; 8]);
    }

    #[test]
    fn mel_bank_peaks_at_tone_band() {
        let sr = 16000.0;
        let analyzer = SpectrumAnalyzer::new(400, 0.0);
        let bank = MelBank::new(8, analyzer.n_fft(), sr, 20.0, 8000.0);
        let frame: Vec<f64> = (0..400)
            .map(|i| (2.0 * PI * 3000.0 * i as f64 / sr).sin())
            .collect();
        let e = bank.log_energies(&analyzer.power(&analyzer.shape(&frame)));
        let argmax = (0..8).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
        // 3 kHz sits in the upper-middle bands of an 8-band mel bank
        assert!((4..=6).contains(&argmax), "{e:?}");
    }
}
