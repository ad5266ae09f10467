//! Detection suppression: greedy NMS and the max-objectness winner rule.

use std::cmp::Ordering;

use crate::decode::Detection;
use crate::geometry::iou;

/// Default IoU above which a lower-scored detection is suppressed.
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// Ranking used everywhere a "best" detection is needed: higher objectness
/// first, then lower class code, then lexicographically smaller corners.
pub fn rank(a: &Detection, b: &Detection) -> Ordering {
    b.objectness
        .total_cmp(&a.objectness)
        .then_with(|| a.label.code().cmp(&b.label.code()))
        .then_with(|| {
            a.bbox
                .corners()
                .iter()
                .zip(b.bbox.corners().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Class-agnostic greedy non-maximum suppression keyed on objectness.
///
/// Output is sorted best-first by [`rank`].
pub fn nms_greedy(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<Detection> = dets.to_vec();
    order.sort_by(rank);

    let mut kept: Vec<Detection> = Vec::with_capacity(order.len());
    let mut removed = vec![false; order.len()];
    for i in 0..order.len() {
        if removed[i] {
            continue;
        }
        let keep = order[i];
        for (j, r) in removed.iter_mut().enumerate().skip(i + 1) {
            if !*r && iou(&keep.bbox, &order[j].bbox) > iou_threshold {
                *r = true;
            }
        }
        kept.push(keep);
    }
    kept
}

/// The single highest-objectness detection, or `None` for an empty list.
pub fn winner_take_all(dets: &[Detection]) -> Option<Detection> {
    dets.iter().copied().min_by(rank)
}
