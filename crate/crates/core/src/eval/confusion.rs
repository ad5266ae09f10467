use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::classifier::{ImageDecision, Verdict};
use crate::error::{Error, Result};
use crate::geometry::ClassLabel;

/// Ground truth {infective, non-infective} by result
/// {infective, non-infective, not classified}.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix2x3 {
    pub counts: [[u64; 3]; 2],
}

impl ConfusionMatrix2x3 {
    pub fn from_counts(counts: [[u64; 3]; 2]) -> Self {
        Self { counts }
    }

    pub fn get(&self, gt: ClassLabel, result: Verdict) -> u64 {
        self.counts[gt.code() as usize][result.index()]
    }

    pub fn accumulate(&mut self, gt: ClassLabel, decision: &ImageDecision) {
        self.record(gt, decision.verdict());
    }

    pub fn record(&mut self, gt: ClassLabel, result: Verdict) {
        self.counts[gt.code() as usize][result.index()] += 1;
    }

    pub fn row_total(&self, gt: ClassLabel) -> u64 {
        self.counts[gt.code() as usize].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.get(ClassLabel::InfectiveCornea, Verdict::Infective)
            + self.get(ClassLabel::NonInfectiveCornea, Verdict::NonInfective)
    }

    /// Images that were not counted correct: wrong class or not classified.
    pub fn errors(&self) -> u64 {
        self.total() - self.correct()
    }

    /// Correct decisions over all images, unclassified ones included.
    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::UndefinedMetric("accuracy of an empty confusion matrix")),
            n => Ok(self.correct() as f64 / n as f64),
        }
    }

    pub fn recall(&self, class: ClassLabel) -> Result<f64> {
        match self.row_total(class) {
            0 => Err(Error::UndefinedMetric("recall of a class with no images")),
            n => Ok(self.get(class, class.into()) as f64 / n as f64),
        }
    }
}

/// Add one (ground truth, decision) pair to a matrix.
pub fn accumulate(
    mut cm: ConfusionMatrix2x3,
    gt: ClassLabel,
    decision: &ImageDecision,
) -> ConfusionMatrix2x3 {
    cm.accumulate(gt, decision);
    cm
}

/// Overall accuracy; see [`ConfusionMatrix2x3::accuracy`].
pub fn accuracy(cm: &ConfusionMatrix2x3) -> Result<f64> {
    cm.accuracy()
}

impl Add for ConfusionMatrix2x3 {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix2x3 {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.counts.iter_mut().flatten().zip(rhs.counts.iter().flatten()) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Detection;
    use crate::geometry::BoundingBox;

    const INF: ClassLabel = ClassLabel::InfectiveCornea;
    const NON: ClassLabel = ClassLabel::NonInfectiveCornea;

    fn decision(v: Verdict) -> ImageDecision {
        let label = match v {
            Verdict::Infective => INF,
            Verdict::NonInfective => NON,
            Verdict::NotClassified => return ImageDecision::not_classified(),
        };
        let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        ImageDecision::from_winner(Some(Detection::new(b, label, 0.9, 0.9).unwrap()))
    }

    #[test]
    fn accumulate_hits_exactly_one_cell() {
        let cm = accumulate(ConfusionMatrix2x3::default(), INF, &decision(Verdict::Infective));
        assert_eq!(cm.counts, [[1, 0, 0], [0, 0, 0]]);
        let cm = accumulate(cm, INF, &decision(Verdict::NotClassified));
        assert_eq!(cm.counts, [[1, 0, 1], [0, 0, 0]]);
        let cm = accumulate(cm, NON, &decision(Verdict::Infective));
        assert_eq!(cm.counts, [[1, 0, 1], [1, 0, 0]]);
    }

    #[test]
    fn published_table_arithmetic() {
        let cm = ConfusionMatrix2x3::from_counts([[89, 10, 1], [12, 84, 0]]);
        assert_eq!(cm.total(), 196);
        assert_eq!(cm.correct(), 173);
        assert!((cm.accuracy().unwrap() - 173.0 / 196.0).abs() < 1e-12);
        assert_eq!(format!("{:.3}", cm.accuracy().unwrap() * 100.0), "88.265");
        assert!((cm.recall(INF).unwrap() - 0.89).abs() < 1e-12);
        assert!((cm.recall(NON).unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_empty() {
        let cm = ConfusionMatrix2x3::from_counts([[5, 0, 0], [0, 7, 0]]);
        assert_eq!(cm.accuracy().unwrap(), 1.0);
        assert!(ConfusionMatrix2x3::default().accuracy().is_err());
        let only_inf = ConfusionMatrix2x3::from_counts([[5, 0, 0], [0, 0, 0]]);
        assert!(only_inf.recall(NON).is_err());
    }

    #[test]
    fn stream_row_sums_match_class_totals() {
        // counting oracle: a fixed pattern of 196 decisions
        let mut cm = ConfusionMatrix2x3::default();
        let mut expected = [[0u64; 3]; 2];
        for i in 0..196usize {
            let gt = if i < 100 { INF } else { NON };
            let v = Verdict::ALL[i % 3];
            expected[gt.code() as usize][v.index()] += 1;
            cm.accumulate(gt, &decision(v));
        }
        assert_eq!(cm.counts, expected);
        assert_eq!(cm.row_total(INF), 100);
        assert_eq!(cm.row_total(NON), 96);
    }

    #[test]
    fn addition_is_elementwise() {
        let a = ConfusionMatrix2x3::from_counts([[1, 2, 3], [4, 5, 6]]);
        let b = ConfusionMatrix2x3::from_counts([[6, 5, 4], [3, 2, 1]]);
        assert_eq!((a + b).counts, [[7; 3]; 2]);
    }
}
