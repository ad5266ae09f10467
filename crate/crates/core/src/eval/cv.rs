use rayon::prelude::*;

use super::confusion::ConfusionMatrix2x3;
use super::folds::FoldAssignment;
use crate::classifier::ImageDecision;
use crate::error::{Error, Result};
use crate::geometry::ClassLabel;
use crate::synth::{Annotation, DatasetManifest};

/// Decision for one held-out image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub index: usize,
    pub fold: usize,
    pub ground_truth: ClassLabel,
    pub decision: ImageDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// One matrix per fold, indexed by fold number.
    pub folds: Vec<ConfusionMatrix2x3>,
    pub pooled: ConfusionMatrix2x3,
    /// Outcomes in manifest order.
    pub outcomes: Vec<ImageOutcome>,
}

/// Cross-validate a classifier over `manifest`.
///
/// `classify` receives the manifest index and record of each held-out
/// image. A training-free classifier simply ignores the training folds; the
/// split and the pooling (element-wise sum of the fold matrices) are what
/// this harness fixes. Every failing image is reported, not just the first.
pub fn run_cv<F>(manifest: &DatasetManifest, folds: &FoldAssignment, classify: F) -> Result<CvResult>
where
    F: Fn(usize, &Annotation) -> Result<ImageDecision> + Sync,
{
    let order: Vec<usize> = (0..folds.k()).collect();
    run_cv_in_order(manifest, folds, &order, classify)
}

/// [`run_cv`] visiting folds in the given order.
pub fn run_cv_in_order<F>(
    manifest: &DatasetManifest,
    folds: &FoldAssignment,
    fold_order: &[usize],
    classify: F,
) -> Result<CvResult>
where
    F: Fn(usize, &Annotation) -> Result<ImageDecision> + Sync,
{
    if folds.len() != manifest.records.len() {
        return Err(Error::Config(format!(
            "fold assignment covers {} images, manifest has {}",
            folds.len(),
            manifest.records.len()
        )));
    }
    let mut sorted = fold_order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..folds.k()).collect::<Vec<_>>() {
        return Err(Error::Config("fold order must visit every fold once".into()));
    }

    let per_fold: Vec<Vec<Result<ImageOutcome>>> = fold_order
        .par_iter()
        .map(|&fold| {
            folds
                .members(fold)
                .into_par_iter()
                .map(|index| {
                    let rec = &manifest.records[index];
                    classify(index, rec).map(|decision| ImageOutcome {
                        index,
                        fold,
                        ground_truth: rec.label,
                        decision,
                    })
                })
                .collect()
        })
        .collect();

    let mut fold_matrices = vec![ConfusionMatrix2x3::default(); folds.k()];
    let mut outcomes = Vec::with_capacity(manifest.records.len());
    let mut failures = Vec::new();
    for result in per_fold.into_iter().flatten() {
        match result {
            Ok(o) => {
                fold_matrices[o.fold].accumulate(o.ground_truth, &o.decision);
                outcomes.push(o);
            }
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Batch(failures));
    }
    outcomes.sort_by_key(|o| o.index);
    let pooled = fold_matrices
        .iter()
        .fold(ConfusionMatrix2x3::default(), |acc, m| acc + *m);
    Ok(CvResult {
        folds: fold_matrices,
        pooled,
        outcomes,
    })
}
