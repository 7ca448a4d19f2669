//! Binary feature container (`BMF1`) and CSV export.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BMF1"
//! 4       4     version (u32, = 1)
//! 8       4     n_frames (u32)
//! 12      4     dim (u32; 420 for analysis frames, 64 for embeddings)
//! 16      4     window_s (f32)
//! 20      4     shift_s (f32)
//! 24      ...   n_frames * dim f32 values, row-major
//! ```
//!
//! The source id is the file stem.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::frames::FrameSequence;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"BMF1";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_EXT: &str = "bmf";
const HEADER_LEN: usize = 24;

pub fn encode_features(seq: &FrameSequence) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * seq.data.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.window_s as f32).to_le_bytes());
    buf.extend_from_slice(&(seq.shift_s as f32).to_le_bytes());
    for v in seq.data.iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    buf
}

pub fn decode_features(bytes: &[u8], source_id: &str) -> Result<FrameSequence> {
    let bad = |msg: &str| Error::InvalidFeatureFile(format!("{source_id}: {msg}"));
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (n, dim) = (u32_at(8) as usize, u32_at(12) as usize);
    let (window_s, shift_s) = (f32_at(16) as f64, f32_at(20) as f64);
    let expected = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| bad("size overflow"))?;
    if bytes.len() - HEADER_LEN != expected {
        return Err(bad(&format!(
            "payload is {} bytes, header implies {expected}",
            bytes.len() - HEADER_LEN
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    let data = Array2::from_shape_vec((n, dim), values).map_err(|e| bad(&e.to_string()))?;
    Ok(FrameSequence::new(source_id, window_s, shift_s, data))
}

/// Writes via a temporary sibling and rename so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_features(path: &Path, seq: &FrameSequence) -> Result<()> {
    write_atomic(path, &encode_features(seq))
}

pub fn source_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_features(path: &Path) -> Result<FrameSequence> {
    let bytes = fs::read(path)?;
    decode_features(&bytes, &source_id_of(path))
}

/// Feature files in a directory, sorted by file name.
pub fn list_feature_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == FEATURE_EXT))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_feature_dir(dir: &Path) -> Result<Vec<FrameSequence>> {
    list_feature_files(dir)?.iter().map(|p| read_features(p)).collect()
}

/// CSV with a `t_start_s` column followed by one column per feature.
pub fn features_to_csv(seq: &FrameSequence, names: &[String]) -> Result<String> {
    if names.len() != seq.dim() {
        return Err(Error::DimensionMismatch {
            expected: seq.dim(),
            got: names.len(),
        });
    }
    let mut out = String::from("t_start_s");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, row) in seq.data.rows().into_iter().enumerate() {
        out.push_str(&format!("{}", seq.t_start_s(i)));
        for v in row {
            out.push_str(&format!(",{}", *v as f32));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn container_round_trips_f32_values(
            n in 0usize..6,
            dim in 1usize..9,
            seed in any::<u32>(),
        ) {
            let data = Array2::from_shape_fn((n, dim), |(i, j)| {
                ((seed as usize + 31 * i + 7 * j) % 1000) as f32 as f64 / 7.0
            });
            let data = data.mapv(|v| v as f32 as f64);
            let seq = FrameSequence::new("x", 20.0, 1.0, data);
            let back = decode_features(&encode_features(&seq), "x").unwrap();
            prop_assert_eq!(back, seq);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let seq = FrameSequence::new("x", 20.0, 1.0, Array2::zeros((2, 3)));
        let mut bytes = encode_features(&seq);
        assert!(decode_features(&bytes[..bytes.len() - 1], "x").is_err());
        bytes[0] = b'X';
        let err = decode_features(&bytes, "x").unwrap_err();
        assert!(err.to_string().contains("invalid feature file"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let seq = FrameSequence::new("x", 20.0, 1.0, Array2::from_elem((2, 2), 0.5));
        let csv = features_to_csv(&seq, &["a".into(), "b".into()]).unwrap();
        assert_eq!(csv, "t_start_s,a,b\n0,0.5,0.5\n1,0.5,0.5\n");
    }
}
