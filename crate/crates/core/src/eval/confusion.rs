//! Cross-file similarity: where each file's frames find their nearest
//! neighbor among the other files.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::knn::nearest;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FrameSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub ids: Vec<String>,
    /// Row `i`: fraction of file `i`'s frames whose nearest other-file frame
    /// lies in file `j`. Rows sum to 1; the diagonal is 0.
    pub matrix: Array2<f64>,
}

pub fn similarity_confusion(files: &[FrameSequence], exec: &Exec) -> Result<SimilarityMatrix> {
    if files.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "similarity needs at least 2 files, got {}",
            files.len()
        )));
    }
    if let Some(f) = files.iter().find(|f| f.is_empty()) {
        return Err(Error::InvalidInput(format!("file {:?} has no frames", f.source_id)));
    }
    let dim = files[0].dim();
    if let Some(f) = files.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f.dim(),
        });
    }
    let k = files.len();
    let mut matrix = Array2::zeros((k, k));
    for i in 0..k {
        let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        let views: Vec<ArrayView2<'_, f64>> = others.iter().map(|&j| files[j].data.view()).collect();
        let refs = concatenate(Axis(0), &views).expect("equal widths");
        let owner: Vec<usize> = others
            .iter()
            .flat_map(|&j| std::iter::repeat(j).take(files[j].len()))
            .collect();
        let hits = exec.map_range(files[i].len(), |t| nearest(files[i].frame(t), refs.view()));
        for h in hits {
            matrix[[i, owner[h?]]] += 1.0;
        }
        let n = files[i].len() as f64;
        matrix.row_mut(i).mapv_inplace(|c| c / n);
    }
    Ok(SimilarityMatrix {
        ids: files.iter().map(|f| f.source_id.clone()).collect(),
        matrix,
    })
}

/// Header row and first column carry the file ids.
pub fn confusion_csv(m: &SimilarityMatrix) -> String {
    let mut s = String::from("file_id");
    for id in &m.ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (id, row) in m.ids.iter().zip(m.matrix.outer_iter()) {
        s.push_str(id);
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
