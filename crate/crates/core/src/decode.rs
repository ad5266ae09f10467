//! Decoding of YOLO-style detection-head tensors.
//!
//! Each head is a `[grid_h][grid_w][n_anchors][5 + n_classes]` array with
//! the last axis ordered `(t_x, t_y, t_w, t_h, t_obj, class logits...)`.
//! Centers are `(sigmoid(t) + cell) * stride`, sizes are
//! `anchor * exp(t)`, objectness and class probabilities are independent
//! logistics (no softmax).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ClassLabel};

/// Number of classes every head must carry.
pub const NUM_CLASSES: usize = 2;

/// Values per anchor slot: four box offsets, objectness, class logits.
pub const SLOT_LEN: usize = 5 + NUM_CLASSES;

/// Default objectness cut applied before suppression.
pub const DEFAULT_OBJECTNESS_THRESHOLD: f64 = 0.5;

/// One detected box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: ClassLabel,
    pub objectness: f64,
    pub class_prob: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, label: ClassLabel, objectness: f64, class_prob: f64) -> Result<Self> {
        for (name, v) in [("objectness", objectness), ("class_prob", class_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Format(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            bbox,
            label,
            objectness,
            class_prob,
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Detection::new(self.bbox, self.label, self.objectness, self.class_prob).map(|_| ())
    }
}

/// Anchor prior size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub w: f64,
    pub h: f64,
}

/// Raw output of one detection head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadTensor {
    grid_w: usize,
    grid_h: usize,
    stride: f64,
    anchors: Vec<Anchor>,
    n_classes: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawHead {
    grid_w: usize,
    grid_h: usize,
    stride: f64,
    anchors: Vec<Anchor>,
    n_classes: usize,
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for HeadTensor {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = RawHead::deserialize(de)?;
        HeadTensor::new(r.grid_w, r.grid_h, r.stride, r.anchors, r.n_classes, r.values)
            .map_err(serde::de::Error::custom)
    }
}

impl HeadTensor {
    pub fn new(
        grid_w: usize,
        grid_h: usize,
        stride: f64,
        anchors: Vec<Anchor>,
        n_classes: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_classes != NUM_CLASSES {
            return Err(Error::Format(format!(
                "head declares {n_classes} classes, expected {NUM_CLASSES}"
            )));
        }
        if !(stride.is_finite() && stride > 0.0) {
            return Err(Error::Format(format!("stride must be positive, got {stride}")));
        }
        if anchors.is_empty() {
            return Err(Error::Format("head has no anchors".into()));
        }
        if let Some(a) = anchors
            .iter()
            .find(|a| !(a.w.is_finite() && a.h.is_finite() && a.w > 0.0 && a.h > 0.0))
        {
            return Err(Error::Format(format!(
                "anchor dimensions must be positive, got ({}, {})",
                a.w, a.h
            )));
        }
        let expected = grid_h * grid_w * anchors.len() * (5 + n_classes);
        if values.len() != expected {
            return Err(Error::Format(format!(
                "value array length mismatch: expected {expected} ({grid_h}x{grid_w}x{}x{}), got {}",
                anchors.len(),
                5 + n_classes,
                values.len()
            )));
        }
        Ok(Self {
            grid_w,
            grid_h,
            stride,
            anchors,
            n_classes,
            values,
        })
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The raw slot for one (cell, anchor) pair.
    pub fn slot(&self, cell_x: usize, cell_y: usize, anchor: usize) -> &[f64] {
        let start = ((cell_y * self.grid_w + cell_x) * self.anchors.len() + anchor) * SLOT_LEN;
        &self.values[start..start + SLOT_LEN]
    }
}

pub fn sigmoid(x: f64) -> f64 {
    // split keeps exp() from overflowing for large |x|
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Where a slot sits in its head; used for error reporting and clamping.
#[derive(Debug, Clone, Copy)]
pub struct CellContext {
    pub cell_x: usize,
    pub cell_y: usize,
    pub anchor_index: usize,
    pub anchor: Anchor,
    pub stride: f64,
    pub image_w: f64,
    pub image_h: f64,
}

/// Decode one anchor slot into a detection clamped to the image.
pub fn decode_cell(t: &[f64], ctx: &CellContext) -> Result<Detection> {
    let fail = |reason: String| Error::Decode {
        cell_x: ctx.cell_x,
        cell_y: ctx.cell_y,
        anchor: ctx.anchor_index,
        reason,
    };
    if t.len() != SLOT_LEN {
        return Err(fail(format!("slot has {} values, expected {SLOT_LEN}", t.len())));
    }
    if let Some(i) = t.iter().position(|v| !v.is_finite()) {
        return Err(fail(format!("non-finite value {} at slot offset {i}", t[i])));
    }

    let cx = (sigmoid(t[0]) + ctx.cell_x as f64) * ctx.stride;
    let cy = (sigmoid(t[1]) + ctx.cell_y as f64) * ctx.stride;
    let w = ctx.anchor.w * t[2].exp();
    let h = ctx.anchor.h * t[3].exp();
    let objectness = sigmoid(t[4]);
    let p_inf = sigmoid(t[5]);
    let p_non = sigmoid(t[6]);
    // ties resolve to the lower class code
    let (label, class_prob) = if p_inf >= p_non {
        (ClassLabel::InfectiveCornea, p_inf)
    } else {
        (ClassLabel::NonInfectiveCornea, p_non)
    };

    let bbox = BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
        .map_err(|e| fail(e.to_string()))?
        .clamp_to(ctx.image_w, ctx.image_h);
    Detection::new(bbox, label, objectness, class_prob).map_err(|e| fail(e.to_string()))
}

/// Decode every (cell, anchor) of a head, keeping detections whose
/// objectness reaches `objectness_threshold`. Output is row-major over
/// cells, then by anchor index.
pub fn decode_head(
    head: &HeadTensor,
    image_w: f64,
    image_h: f64,
    objectness_threshold: f64,
) -> Result<Vec<Detection>> {
    check_threshold("objectness_threshold", objectness_threshold)?;
    let mut out = Vec::new();
    for cell_y in 0..head.grid_h {
        for cell_x in 0..head.grid_w {
            for (anchor_index, &anchor) in head.anchors.iter().enumerate() {
                let ctx = CellContext {
                    cell_x,
                    cell_y,
                    anchor_index,
                    anchor,
                    stride: head.stride,
                    image_w,
                    image_h,
                };
                let det = decode_cell(head.slot(cell_x, cell_y, anchor_index), &ctx)?;
                if det.objectness >= objectness_threshold {
                    out.push(det);
                }
            }
        }
    }
    Ok(out)
}

/// Decode several heads (e.g. the three scales of a YOLOv3 model)
/// concurrently and concatenate the results in head order.
pub fn decode_heads(
    heads: &[HeadTensor],
    image_w: f64,
    image_h: f64,
    objectness_threshold: f64,
) -> Result<Vec<Detection>> {
    let per_head = heads
        .par_iter()
        .map(|h| decode_head(h, image_w, image_h, objectness_threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_head.into_iter().flatten().collect())
}

pub(crate) fn check_threshold(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}
