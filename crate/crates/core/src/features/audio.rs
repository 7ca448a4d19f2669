use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Mono PCM audio normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InsufficientAudio("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Reads a RIFF WAV file. Integer PCM of any width is accepted; stereo and
    /// wider layouts are downmixed by averaging channels.
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = hound::WavReader::open(path.as_ref())?;
        let spec = reader.spec();
        if spec.sample_format != hound::SampleFormat::Int {
            return Err(Error::InvalidInput(format!(
                "{}: only integer PCM is supported",
                path.as_ref().display()
            )));
        }
        let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
        let raw = reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / scale))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let channels = spec.channels.max(1) as usize;
        let samples = raw
            .chunks_exact(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect();
        Self::new(samples, spec.sample_rate)
    }

    /// Writes 16-bit mono PCM.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate_hz,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
        }
        writer.finalize()?;
        Ok(())
    }

    /// Band-limited resampling with a Blackman-windowed sinc kernel.
    pub fn resample(&self, target_hz: u32) -> Result<Self> {
        if target_hz == self.sample_rate_hz {
            return Ok(self.clone());
        }
        if target_hz == 0 {
            return Err(Error::InvalidInput("target sample rate must be positive".into()));
        }
        const ZERO_CROSSINGS: f64 = 16.0;
        let ratio = target_hz as f64 / self.sample_rate_hz as f64;
        // cutoff in cycles per input sample
        let cutoff = 0.5 * ratio.min(1.0) * 0.97;
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        let n_in = self.samples.len();
        let n_out = ((n_in as f64) * ratio).floor().max(1.0) as usize;

        let out = (0..n_out)
            .map(|m| {
                let t = m as f64 / ratio;
                let lo = (t - half_width).ceil().max(0.0) as usize;
                let hi = ((t + half_width).floor() as usize).min(n_in - 1);
                let mut acc = 0.0;
                for n in lo..=hi {
                    let tau = t - n as f64;
                    let x = 2.0 * cutoff * tau;
                    let sinc = if x.abs() < 1e-12 {
                        1.0
                    } else {
                        (PI * x).sin() / (PI * x)
                    };
                    let u = (tau / half_width + 1.0) * 0.5;
                    let win = 0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos();
                    acc += self.samples[n] * 2.0 * cutoff * sinc * win;
                }
                acc
            })
            .collect();
        Self::new(out, target_hz)
    }
}
