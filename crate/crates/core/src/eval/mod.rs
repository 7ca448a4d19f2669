//! Evaluation of frozen frame representations against session labels.

pub mod confusion;
pub mod knn;
pub mod sessions;
pub mod trajectory;

pub use confusion::{confusion_csv, similarity_confusion, SimilarityMatrix};
pub use knn::{knn_label, nearest, top_n};
pub use sessions::{
    balanced_subset, build_sessions, classify_sessions, mcnemar_counts, parse_labels_csv,
    predictions_csv, reference_set, ClassificationReport, Embedder, Fold, FoldPlan, LabelRow, McNemarCounts,
    RawFeatures, SessionPrediction, SessionRecord,
};
pub use trajectory::{trajectory, trajectory_csv, TrajectoryScore, DEFAULT_TRAJECTORY_N};
