//! Axis-aligned boxes and class labels.
//!
//! Coordinates are real-valued pixels in the image frame: origin at the
//! top-left corner, `y` growing downward. Areas use plain coordinate
//! differences (continuous convention), so a box `(0, 0, 10, 10)` covers
//! exactly 100 px².

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel coordinates.
///
/// Always satisfies `x_min <= x_max` and `y_min <= y_max` with no NaN
/// corners. Zero-area boxes are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        if [x_min, y_min, x_max, y_max].iter().any(|v| v.is_nan()) {
            return Err(invalid("NaN coordinate"));
        }
        if x_min > x_max {
            return Err(invalid("x_min > x_max"));
        }
        if y_min > y_max {
            return Err(invalid("y_min > y_max"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box from a center point and full side lengths.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Clamp to `[0, width] x [0, height]`. A box lying entirely outside
    /// collapses onto the nearest border.
    pub fn clamp_to(&self, width: f64, height: f64) -> Self {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        Self {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub(crate) fn corners(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

#[derive(Deserialize)]
struct RawBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawBox::deserialize(de)?;
        BoundingBox::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max)
            .map_err(serde::de::Error::custom)
    }
}

/// Area of a box in px².
pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Cornea class. Integer codes are fixed: infective = 0, non-infective = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "infective_cornea")]
    InfectiveCornea,
    #[serde(rename = "non_infective_cornea")]
    NonInfectiveCornea,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::InfectiveCornea, ClassLabel::NonInfectiveCornea];

    pub fn code(self) -> u8 {
        match self {
            ClassLabel::InfectiveCornea => 0,
            ClassLabel::NonInfectiveCornea => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ClassLabel::InfectiveCornea),
            1 => Some(ClassLabel::NonInfectiveCornea),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::InfectiveCornea => "infective_cornea",
            ClassLabel::NonInfectiveCornea => "non_infective_cornea",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infective_cornea" => Ok(ClassLabel::InfectiveCornea),
            "non_infective_cornea" => Ok(ClassLabel::NonInfectiveCornea),
            other => Err(Error::Format(format!("unknown class label {other:?}"))),
        }
    }
}
