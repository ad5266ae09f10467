//! Image-level decision from a list of detections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decode::{check_threshold, Detection};
use crate::error::{Error, Result};
use crate::geometry::ClassLabel;
use crate::suppression::{nms_greedy, winner_take_all};

/// Three-way image verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Infective,
    NonInfective,
    NotClassified,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Infective, Verdict::NonInfective, Verdict::NotClassified];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Infective => "infective",
            Verdict::NonInfective => "non_infective",
            Verdict::NotClassified => "not_classified",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<ClassLabel> for Verdict {
    fn from(l: ClassLabel) -> Self {
        match l {
            ClassLabel::InfectiveCornea => Verdict::Infective,
            ClassLabel::NonInfectiveCornea => Verdict::NonInfective,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown decision {s:?}")))
    }
}

/// Verdict plus the detection that produced it.
///
/// `winner` is `None` exactly when the verdict is `NotClassified`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageDecision {
    verdict: Verdict,
    winner: Option<Detection>,
}

impl ImageDecision {
    pub fn not_classified() -> Self {
        Self {
            verdict: Verdict::NotClassified,
            winner: None,
        }
    }

    pub fn from_winner(winner: Option<Detection>) -> Self {
        match winner {
            Some(d) => Self {
                verdict: d.label.into(),
                winner: Some(d),
            },
            None => Self::not_classified(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn winner(&self) -> Option<&Detection> {
        self.winner.as_ref()
    }

    pub fn objectness(&self) -> Option<f64> {
        self.winner.map(|d| d.objectness)
    }
}

/// Objectness filter, then greedy NMS, then max-objectness winner.
pub fn classify_image(
    dets: &[Detection],
    objectness_threshold: f64,
    iou_threshold: f64,
) -> Result<ImageDecision> {
    check_threshold("objectness_threshold", objectness_threshold)?;
    check_threshold("iou_threshold", iou_threshold)?;
    let kept: Vec<Detection> = dets
        .iter()
        .filter(|d| d.objectness >= objectness_threshold)
        .copied()
        .collect();
    let survivors = nms_greedy(&kept, iou_threshold);
    Ok(ImageDecision::from_winner(winner_take_all(&survivors)))
}
