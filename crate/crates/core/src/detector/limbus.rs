//! Limbus (cornea boundary) localization by gradient-direction voting.
//!
//! The cornea is darker than the surrounding sclera, so along the limbus
//! the intensity gradient points radially outward. Each strong edge pixel
//! votes for centers lying against its gradient at every admissible radius;
//! the smoothed vote peak gives the center. Radius candidates come from a
//! circumference-normalized histogram of edge distances; each is refined by
//! a least-squares circle fit, and the outermost supported one wins. The circle's
//! strength is the fraction of the lateral limbus arcs (the parts eyelids
//! do not cover) that show a supporting outward edge.

use serde::{Deserialize, Serialize};

use super::gray::{Gradient, GrayImage};
use super::DetectorConfig;

/// Smallest image side the detector accepts.
pub const MIN_IMAGE_SIDE: usize = 64;

const RADIUS_BIN: f64 = 0.5;

/// A detected cornea boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbusCircle {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    /// Edge support on the lateral limbus arcs, in [0, 1].
    pub vote_strength: f64,
}

/// Smoothed image plus its gradient, shared by the detector stages.
pub(crate) struct Prepared {
    pub smoothed: GrayImage,
    pub gradient: Gradient,
}

impl Prepared {
    pub fn new(img: &GrayImage, cfg: &DetectorConfig) -> Self {
        let smoothed = img.gaussian_blur(cfg.blur_sigma);
        let gradient = smoothed.sobel();
        Self { smoothed, gradient }
    }
}

struct Edge {
    x: f64,
    y: f64,
    ux: f64,
    uy: f64,
}

fn edges(g: &Gradient, threshold: f32) -> Vec<Edge> {
    let mut out = Vec::new();
    for y in 0..g.height {
        for x in 0..g.width {
            let (gx, gy) = g.at(x, y);
            let m = gx.hypot(gy);
            if m >= threshold {
                out.push(Edge {
                    x: x as f64 + 0.5,
                    y: y as f64 + 0.5,
                    ux: (gx / m) as f64,
                    uy: (gy / m) as f64,
                });
            }
        }
    }
    out
}

fn radius_range(w: usize, h: usize, cfg: &DetectorConfig) -> (f64, f64) {
    let side = w.min(h) as f64;
    (cfg.radius_min_fraction * side, cfg.radius_max_fraction * side)
}

fn vote_centers(edges: &[Edge], w: usize, h: usize, r_min: f64, r_max: f64) -> GrayImage {
    let mut acc = GrayImage::new(w, h, 0.0);
    let steps = (r_max - r_min).floor() as usize;
    for e in edges {
        for s in 0..=steps {
            let r = r_min + s as f64;
            // pixel-center coordinates back to the grid
            let fx = e.x - r * e.ux - 0.5;
            let fy = e.y - r * e.uy - 0.5;
            if fx < 0.0 || fy < 0.0 {
                continue;
            }
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            if x0 + 1 >= w || y0 + 1 >= h {
                continue;
            }
            let (tx, ty) = ((fx - x0 as f64) as f32, (fy - y0 as f64) as f32);
            for (x, y, wgt) in [
                (x0, y0, (1.0 - tx) * (1.0 - ty)),
                (x0 + 1, y0, tx * (1.0 - ty)),
                (x0, y0 + 1, (1.0 - tx) * ty),
                (x0 + 1, y0 + 1, tx * ty),
            ] {
                acc.set(x, y, acc.get(x, y) + wgt);
            }
        }
    }
    acc
}

fn peak(acc: &GrayImage) -> Option<(f64, f64)> {
    let (mut best, mut at) = (0.0f32, None);
    for y in 0..acc.height() {
        for x in 0..acc.width() {
            let v = acc.get(x, y);
            if v > best {
                best = v;
                at = Some((x, y));
            }
        }
    }
    let (px, py) = at?;
    // sub-pixel refinement: weighted centroid of the 5x5 neighbourhood
    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for y in py.saturating_sub(2)..(py + 3).min(acc.height()) {
        for x in px.saturating_sub(2)..(px + 3).min(acc.width()) {
            let v = acc.get(x, y) as f64;
            sw += v;
            sx += v * (x as f64 + 0.5);
            sy += v * (y as f64 + 0.5);
        }
    }
    Some((sx / sw, sy / sw))
}

fn outward_alignment(e: &Edge, cx: f64, cy: f64) -> Option<(f64, f64)> {
    let (dx, dy) = (e.x - cx, e.y - cy);
    let d = dx.hypot(dy);
    if d == 0.0 {
        return None;
    }
    Some((d, (e.ux * dx + e.uy * dy) / d))
}

/// Local maxima of the circumference-normalized radius histogram, largest
/// radius first. Peaks below a fifth of the strongest are dropped.
fn radius_candidates(edges: &[Edge], cx: f64, cy: f64, r_min: f64, r_max: f64, cfg: &DetectorConfig) -> Vec<f64> {
    let n_bins = ((r_max - r_min) / RADIUS_BIN).ceil() as usize + 1;
    let mut hist = vec![0.0f64; n_bins];
    for e in edges {
        if let Some((d, cos)) = outward_alignment(e, cx, cy) {
            if cos >= cfg.alignment_min && d >= r_min && d <= r_max {
                hist[((d - r_min) / RADIUS_BIN).round() as usize] += 1.0 / d;
            }
        }
    }
    let at = |i: isize| if i < 0 { 0.0 } else { hist.get(i as usize).copied().unwrap_or(0.0) };
    let smoothed: Vec<f64> = (0..n_bins as isize)
        .map(|i| 0.25 * at(i - 1) + 0.5 * at(i) + 0.25 * at(i + 1))
        .collect();
    let top = smoothed.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let mut peaks: Vec<f64> = (0..n_bins)
        .filter(|&i| {
            let v = smoothed[i];
            v >= 0.2 * top
                && (i == 0 || v > smoothed[i - 1])
                && (i + 1 == n_bins || v >= smoothed[i + 1])
        })
        .map(|i| r_min + i as f64 * RADIUS_BIN)
        .collect();
    peaks.reverse();
    peaks
}

/// Algebraic least-squares circle fit (Kasa) through the aligned edges in
/// a band around the current circle, repeated with a narrowing band.
fn refine_circle(edges: &[Edge], mut c: (f64, f64, f64), cfg: &DetectorConfig) -> (f64, f64, f64) {
    for band in [5.0, 3.0, 2.0] {
        let (mut m, mut v) = ([[0.0f64; 3]; 3], [0.0f64; 3]);
        let mut n = 0usize;
        for e in edges {
            let Some((d, cos)) = outward_alignment(e, c.0, c.1) else { continue };
            if cos < cfg.alignment_min || (d - c.2).abs() > band {
                continue;
            }
            // x^2 + y^2 + D x + E y + F = 0, in coordinates relative to c
            let (x, y) = (e.x - c.0, e.y - c.1);
            let row = [x, y, 1.0];
            let rhs = -(x * x + y * y);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += row[i] * row[j];
                }
                v[i] += row[i] * rhs;
            }
            n += 1;
        }
        if n < 16 {
            break;
        }
        let Some([d, e, f]) = solve3(m, v) else { break };
        let (ox, oy) = (-d / 2.0, -e / 2.0);
        let r2 = ox * ox + oy * oy - f;
        if r2.is_nan() || r2 <= 0.0 || ox.hypot(oy) > band {
            break;
        }
        c = (c.0 + ox, c.1 + oy, r2.sqrt());
    }
    c
}

fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-9 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = v[i];
        }
        *o = det(mk) / d;
    }
    Some(out)
}

/// Geometric mean over the two lateral arcs of the fraction of samples
/// backed by an outward edge. A one-sided arc scores zero.
fn lateral_support(g: &Gradient, cx: f64, cy: f64, r: f64, cfg: &DetectorConfig) -> f64 {
    let half = cfg.lateral_half_angle_deg.round() as i32;
    let supported = |th: f64| {
        let (ux, uy) = (th.cos(), th.sin());
        (-4..=4).any(|k| {
            let rr = r + 0.5 * k as f64;
            let (fx, fy) = (cx + rr * ux, cy + rr * uy);
            if fx < 0.0 || fy < 0.0 {
                return false;
            }
            let (x, y) = (fx as usize, fy as usize);
            if x >= g.width || y >= g.height {
                return false;
            }
            let (gx, gy) = g.at(x, y);
            let m = gx.hypot(gy);
            m >= cfg.edge_threshold
                && ((gx as f64 * ux + gy as f64 * uy) / m as f64) >= cfg.support_alignment_min
        })
    };
    let arc = |base: i32| {
        let hits = (-half..=half)
            .filter(|deg| supported(((base + deg) as f64).to_radians()))
            .count();
        hits as f64 / (2 * half + 1) as f64
    };
    (arc(0) * arc(180)).sqrt()
}

pub(crate) fn find_limbus(prep: &Prepared, cfg: &DetectorConfig) -> Option<LimbusCircle> {
    let (w, h) = (prep.smoothed.width(), prep.smoothed.height());
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return None;
    }
    let (r_min, r_max) = radius_range(w, h, cfg);
    let edges = edges(&prep.gradient, cfg.edge_threshold);
    if edges.is_empty() {
        return None;
    }
    let acc = vote_centers(&edges, w, h, r_min, r_max).gaussian_blur(cfg.accumulator_sigma);
    let (cx, cy) = peak(&acc)?;
    // The limbus is the outermost concentric dark-to-bright boundary; inner
    // ones (pupil, opacity rims) are skipped when an outer circle holds up.
    let mut best: Option<LimbusCircle> = None;
    for r0 in radius_candidates(&edges, cx, cy, r_min, r_max, cfg) {
        let (x, y, r) = refine_circle(&edges, (cx, cy, r0), cfg);
        if !(r_min..=r_max).contains(&r) {
            continue;
        }
        let vote_strength = lateral_support(&prep.gradient, x, y, r, cfg);
        let c = LimbusCircle {
            center_x: x,
            center_y: y,
            radius: r,
            vote_strength,
        };
        if vote_strength >= cfg.vote_acceptance {
            return Some(c);
        }
        if best.is_none_or(|b| vote_strength > b.vote_strength) {
            best = Some(c);
        }
    }
    best.filter(|c| c.vote_strength >= cfg.vote_acceptance)
}

/// Locate the limbus circle, or `None` when no circle gathers enough
/// support (or the image is smaller than [`MIN_IMAGE_SIDE`]).
pub fn detect_limbus(img: &GrayImage, cfg: &DetectorConfig) -> Option<LimbusCircle> {
    find_limbus(&Prepared::new(img, cfg), cfg)
}
