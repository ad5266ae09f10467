//! Stratified cross-validation and confusion-matrix metrics.

mod confusion;
mod cv;
mod folds;

pub use confusion::{accumulate, accuracy, ConfusionMatrix2x3};
pub use cv::{run_cv, run_cv_in_order, CvResult, ImageOutcome};
pub use folds::{kfold_split, kfold_split_labels, FoldAssignment};

/// Fold count used throughout the evaluation protocol.
pub const DEFAULT_FOLDS: usize = 5;
