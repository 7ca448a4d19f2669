//! Audio to analysis frames.
//!
//! 25 ms / 10 ms descriptor frames carry 35 base descriptors (pitch,
//! intensity, 15 MFCC, 8 log mel bands, 8 LPC, jitter, shimmer) plus their
//! deltas. Each 20 s analysis window (1 s shift) is summarized by six
//! functionals per descriptor, giving 70 x 6 = 420 values in functional-major
//! order (`p1__pitch, p1__intensity, ..., std__d_shimmer`).

pub mod audio;
pub mod frames;
pub mod functionals;
pub mod io;
pub mod lld;
pub mod spectral;
pub mod voice;

pub use audio::AudioBuffer;
pub use frames::{extract_analysis_frames, FrameSequence, DEFAULT_SHIFT_S, DEFAULT_WINDOW_S};
pub use functionals::compute_functionals;
pub use lld::{compute_lld_sequence, LldConfig, LldSequence};

use crate::error::Result;
use crate::exec::Exec;

/// Full audio-to-frames pipeline for one file.
pub fn extract_features(
    audio: &AudioBuffer,
    cfg: &LldConfig,
    window_s: f64,
    shift_s: f64,
    source_id: &str,
    exec: &Exec,
) -> Result<FrameSequence> {
    let llds = compute_lld_sequence(audio, cfg)?;
    extract_analysis_frames(&llds, window_s, shift_s, source_id, exec)
}

/// Column names of the default 420-dim layout.
pub fn default_frame_names() -> Vec<String> {
    functionals::functional_names(&LldConfig::default().column_names())
}
