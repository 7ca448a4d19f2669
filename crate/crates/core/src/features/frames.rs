use ndarray::{s, Array2, ArrayView1};

use super::functionals::{compute_functionals, functional_names};
use super::lld::LldSequence;
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_WINDOW_S: f64 = 20.0;
pub const DEFAULT_SHIFT_S: f64 = 1.0;

/// Ordered analysis frames of one source file; row `i` starts at `i * shift_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub source_id: String,
    pub window_s: f64,
    pub shift_s: f64,
    pub data: Array2<f64>,
}

impl FrameSequence {
    pub fn new(source_id: impl Into<String>, window_s: f64, shift_s: f64, data: Array2<f64>) -> Self {
        Self {
            source_id: source_id.into(),
            window_s,
            shift_s,
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn t_start_s(&self, i: usize) -> f64 {
        i as f64 * self.shift_s
    }
}

fn rows_for(ms: f64, hop_ms: f64, what: &str) -> Result<usize> {
    let rows = ms / hop_ms;
    if (rows - rows.round()).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "{what} of {ms} ms is not a multiple of the {hop_ms} ms hop"
        )));
    }
    Ok(rows.round() as usize)
}

/// Slides a `window_s` window in `shift_s` steps over the descriptors and
/// summarizes each full window with the six functionals.
pub fn extract_analysis_frames(
    llds: &LldSequence,
    window_s: f64,
    shift_s: f64,
    source_id: &str,
    exec: &Exec,
) -> Result<FrameSequence> {
    if !(window_s > 0.0 && shift_s > 0.0) {
        return Err(Error::Config("window and shift must be positive".into()));
    }
    let shift_rows = rows_for(shift_s * 1000.0, llds.hop_ms, "shift")?;
    let window_rows =
        ((window_s * 1000.0 - llds.frame_len_ms) / llds.hop_ms + 1e-9).floor() as usize + 1;
    let total = llds.n_frames();
    if shift_rows == 0 || total < window_rows {
        return Err(Error::SessionTooShort {
            source_id: source_id.to_string(),
            duration_s: llds.duration_s(),
            window_s,
        });
    }
    let count = (total - window_rows) / shift_rows + 1;
    let rows = exec.map_range(count, |i| {
        let start = i * shift_rows;
        compute_functionals(llds.frames.slice(s![start..start + window_rows, ..]))
    });
    let dim = 6 * llds.frames.ncols();
    let mut data = Array2::<f64>::zeros((count, dim));
    for (i, row) in rows.into_iter().enumerate() {
        data.row_mut(i).assign(&ArrayView1::from(&row?[..]));
    }
    Ok(FrameSequence::new(source_id, window_s, shift_s, data))
}

/// Column names of analysis frames built from `llds`.
pub fn frame_names(llds: &LldSequence) -> Vec<String> {
    functional_names(&llds.names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_llds(duration_s: f64) -> LldSequence {
        let n = ((duration_s * 1000.0 - 25.0) / 10.0).floor() as usize + 1;
        LldSequence {
            frames: Array2::from_shape_fn((n, 70), |(t, c)| ((t * 7 + c) % 13) as f64),
            names: (0..70).map(|i| format!("c{i}")).collect(),
            frame_len_ms: 25.0,
            hop_ms: 10.0,
        }
    }

    #[test]
    fn frame_counts() {
        let exec = Exec::sequential();
        let f = extract_analysis_frames(&fake_llds(600.0), 20.0, 1.0, "a", &exec).unwrap();
        assert_eq!(f.len(), 581);
        assert_eq!(f.dim(), 420);
        let f = extract_analysis_frames(&fake_llds(20.0), 20.0, 1.0, "a", &exec).unwrap();
        assert_eq!(f.len(), 1);
        assert!(matches!(
            extract_analysis_frames(&fake_llds(19.9), 20.0, 1.0, "a", &exec),
            Err(Error::SessionTooShort { .. })
        ));
    }

    #[test]
    fn start_times_follow_shift() {
        let f = extract_analysis_frames(&fake_llds(25.0), 20.0, 1.0, "a", &Exec::sequential()).unwrap();
        assert_eq!(f.len(), 6);
        assert_eq!(f.t_start_s(5) - f.t_start_s(4), 1.0);
    }

    #[test]
    fn shift_must_align_with_hop() {
        assert!(extract_analysis_frames(&fake_llds(30.0), 20.0, 0.0155, "a", &Exec::sequential()).is_err());
    }
}
