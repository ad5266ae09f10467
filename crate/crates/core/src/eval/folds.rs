use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ClassLabel;
use crate::synth::DatasetManifest;

/// Fold index for every image of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fold of image `index`.
    pub fn fold_of(&self, index: usize) -> usize {
        self.folds[index]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Image indices held out in fold `fold`, ascending.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment over a manifest.
pub fn kfold_split(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldAssignment> {
    kfold_split_labels(&manifest.labels(), k, seed)
}

/// Stratified k-fold assignment: each class is shuffled with its own
/// seeded stream and dealt round-robin, continuing the deal where the
/// previous class stopped so fold totals also stay within one.
pub fn kfold_split_labels(labels: &[ClassLabel], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut folds = vec![usize::MAX; labels.len()];
    let mut next = 0usize;
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::Config(format!(
                "class {class} has {} image(s), fewer than {k} folds",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class.code() as u64);
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, folds })
}
