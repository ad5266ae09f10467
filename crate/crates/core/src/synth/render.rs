//! Layered raster renderer for synthetic anterior-eye scenes.
//!
//! Layers, back to front: sclera with conjunctival vessels, cornea disc
//! (iris texture and pupil), opacity blob, specular highlights, eyelids.
//! Everything is then scaled by the illumination gain, perturbed with
//! Gaussian noise and quantized to 8-bit RGB.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::params::SceneParams;
use super::Annotation;
use crate::error::Result;
use crate::geometry::BoundingBox;

const NOISE_SIGMA: f64 = 2.0 / 255.0;
/// Vertical drop of the lid margin per unit of squared horizontal offset
/// (in cornea radii).
const LID_CURVATURE: f64 = 0.15;
const PUPIL_FRACTION: f64 = 0.28;
/// Speculars are placed within this fraction of the cornea radius.
const SPECULAR_PLACEMENT: f64 = 0.85;
const PLACEMENT_TRIES: usize = 64;

const SKIN: [f64; 3] = [0.42, 0.27, 0.22];
const SCLERA: [f64; 3] = [0.92, 0.90, 0.88];
const SCLERA_RED: [f64; 3] = [0.92, 0.62, 0.60];
const VESSEL: [f64; 3] = [0.72, 0.18, 0.18];
const IRIS: [f64; 3] = [0.30, 0.42, 0.52];
const PUPIL: [f64; 3] = [0.12, 0.12, 0.14];
const OPACITY: [f64; 3] = [0.93, 0.93, 0.90];
const SPECULAR: [f64; 3] = [1.0, 1.0, 1.0];

/// Where the stochastic elements of a scene ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub cornea_center: (f64, f64),
    pub opacity_center: (f64, f64),
    pub opacity_radius: f64,
    pub speculars: Vec<Specular>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Specular {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    pub angle: f64,
}

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<[f64; 3]>,
}

impl Canvas {
    fn new(w: usize, h: usize, fill: [f64; 3]) -> Self {
        Self {
            w,
            h,
            px: vec![fill; w * h],
        }
    }

    fn blend(&mut self, x: usize, y: usize, color: [f64; 3], alpha: f64) {
        if alpha <= 0.0 {
            return;
        }
        let a = alpha.min(1.0);
        let p = &mut self.px[y * self.w + x];
        for c in 0..3 {
            p[c] += (color[c] - p[c]) * a;
        }
    }

    /// Visit every pixel center inside the given (clipped) rectangle.
    fn for_region(
        &mut self,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        mut f: impl FnMut(&mut Self, usize, usize, f64, f64),
    ) {
        let xa = x0.floor().max(0.0) as usize;
        let ya = y0.floor().max(0.0) as usize;
        let xb = (x1.ceil().max(0.0) as usize).min(self.w);
        let yb = (y1.ceil().max(0.0) as usize).min(self.h);
        for y in ya..yb {
            for x in xa..xb {
                f(self, x, y, x as f64 + 0.5, y as f64 + 0.5);
            }
        }
    }
}

/// Eyelid margins of a scene.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lids {
    cx: f64,
    r: f64,
    upper: f64,
    lower: f64,
}

impl Lids {
    pub(crate) fn new(p: &SceneParams) -> Self {
        let (cx, cy) = p.cornea_center();
        let r = p.cornea_radius;
        let occluded = (1.0 - p.eyelid_open_fraction) / 2.0;
        Self {
            cx,
            r,
            upper: cy - r + 2.0 * r * occluded,
            lower: cy + r - 2.0 * r * occluded,
        }
    }

    /// (upper margin y, lower margin y) at column `x`.
    pub(crate) fn margins(&self, x: f64) -> (f64, f64) {
        let u = (x - self.cx) / self.r;
        let sag = LID_CURVATURE * self.r * u * u;
        (self.upper + sag, self.lower - sag)
    }

    /// Signed distance into the visible eye opening (positive = visible).
    pub(crate) fn openness(&self, x: f64, y: f64) -> f64 {
        let (top, bottom) = self.margins(x);
        (y - top).min(bottom - y)
    }
}

fn coverage(signed_inside: f64) -> f64 {
    (signed_inside + 0.5).clamp(0.0, 1.0)
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn place_opacity(p: &SceneParams, lids: &Lids, rng: &mut ChaCha8Rng) -> ((f64, f64), f64) {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    let dist = p.opacity_radial_fraction * r;
    let radius = p.opacity_size_fraction * r;
    let at = |phi: f64| (cx + dist * phi.cos(), cy + dist * phi.sin());
    for _ in 0..PLACEMENT_TRIES {
        let phi = rng.random_range(0.0..2.0 * PI);
        let (x, y) = at(phi);
        if lids.openness(x, y) >= 0.5 * radius {
            return ((x, y), radius);
        }
    }
    (at(0.0), radius)
}

fn place_speculars(p: &SceneParams, lids: &Lids, rng: &mut ChaCha8Rng) -> Vec<Specular> {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    (0..p.specular_count)
        .map(|_| {
            let a = rng.random_range(0.10..0.16) * r;
            let b = a * rng.random_range(0.5..1.0);
            let angle = rng.random_range(0.0..PI);
            let mut center = (cx, cy);
            for _ in 0..PLACEMENT_TRIES {
                let rad = SPECULAR_PLACEMENT * r * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..2.0 * PI);
                let c = (cx + rad * phi.cos(), cy + rad * phi.sin());
                if lids.openness(c.0, c.1) >= b {
                    center = c;
                    break;
                }
            }
            Specular {
                center,
                semi_axes: (a, b),
                angle,
            }
        })
        .collect()
}

fn draw_vessels(canvas: &mut Canvas, p: &SceneParams, rng: &mut ChaCha8Rng) {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    let count = (4.0 + 10.0 * p.redness_level).round() as usize;
    let alpha = 0.25 + 0.6 * p.redness_level;
    for _ in 0..count {
        let psi = rng.random_range(0.0..2.0 * PI);
        let r0 = r * rng.random_range(1.08..1.2);
        let len = r * rng.random_range(0.4..0.9);
        let width = rng.random_range(0.8..1.6);
        let bend = rng.random_range(-0.25..0.25);
        // short polyline drifting away from the limbus
        let mut pts = Vec::with_capacity(6);
        for k in 0..6 {
            let t = k as f64 / 5.0;
            let ang = psi + bend * t;
            let rad = r0 + len * t;
            pts.push((cx + rad * ang.cos(), cy + rad * ang.sin()));
        }
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let pad = width + 1.0;
            canvas.for_region(
                a.0.min(b.0) - pad,
                a.1.min(b.1) - pad,
                a.0.max(b.0) + pad,
                a.1.max(b.1) + pad,
                |cv, x, y, fx, fy| {
                    let d = segment_distance((fx, fy), a, b);
                    cv.blend(x, y, VESSEL, alpha * coverage(width / 2.0 - d));
                },
            );
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn draw_cornea(canvas: &mut Canvas, p: &SceneParams, rng: &mut ChaCha8Rng) {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    let pupil_r = PUPIL_FRACTION * r;
    let ph1 = rng.random_range(0.0..2.0 * PI);
    let ph2 = rng.random_range(0.0..2.0 * PI);
    canvas.for_region(cx - r - 1.0, cy - r - 1.0, cx + r + 1.0, cy + r + 1.0, |cv, x, y, fx, fy| {
        let (dx, dy) = (fx - cx, fy - cy);
        let d = dx.hypot(dy);
        let cov = coverage(r - d);
        if cov <= 0.0 {
            return;
        }
        let theta = dy.atan2(dx);
        let striation = 0.6 * (9.0 * theta + ph1).sin() + 0.4 * (23.0 * theta + ph2).sin();
        let limbal_ring = 1.0 - 0.15 * smoothstep(0.85, 1.0, d / r);
        let m = (1.0 + 0.10 * striation) * limbal_ring;
        let iris = [IRIS[0] * m, IRIS[1] * m, IRIS[2] * m];
        let color = lerp3(iris, PUPIL, coverage(pupil_r - d));
        cv.blend(x, y, color, cov);
    });
}

fn draw_opacity(canvas: &mut Canvas, p: &SceneParams, center: (f64, f64), radius: f64) {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    canvas.for_region(
        center.0 - radius - 1.0,
        center.1 - radius - 1.0,
        center.0 + radius + 1.0,
        center.1 + radius + 1.0,
        |cv, x, y, fx, fy| {
            let d = (fx - center.0).hypot(fy - center.1);
            let profile = 0.9 * (1.0 - smoothstep(0.6, 1.0, d / radius));
            let in_disc = coverage(r - (fx - cx).hypot(fy - cy));
            cv.blend(x, y, OPACITY, profile * in_disc);
        },
    );
}

fn draw_specular(canvas: &mut Canvas, p: &SceneParams, s: &Specular) {
    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    let (a, b) = s.semi_axes;
    let (sin, cos) = s.angle.sin_cos();
    canvas.for_region(
        s.center.0 - a - 1.0,
        s.center.1 - a - 1.0,
        s.center.0 + a + 1.0,
        s.center.1 + a + 1.0,
        |cv, x, y, fx, fy| {
            let (dx, dy) = (fx - s.center.0, fy - s.center.1);
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            let q = ((u / a).powi(2) + (v / b).powi(2)).sqrt();
            let cov = coverage((1.0 - q) * b);
            let in_disc = coverage(r - (fx - cx).hypot(fy - cy));
            cv.blend(x, y, SPECULAR, p.specular_intensity * cov * in_disc);
        },
    );
}

fn draw_lids(canvas: &mut Canvas, lids: &Lids) {
    let (w, h) = (canvas.w as f64, canvas.h as f64);
    canvas.for_region(0.0, 0.0, w, h, |cv, x, y, fx, fy| {
        let cov = coverage(-lids.openness(fx, fy));
        cv.blend(x, y, SKIN, cov);
    });
}

/// Render a scene and its ground-truth annotation (with an empty path).
pub fn render_scene(p: &SceneParams, seed: u64) -> Result<(RgbImage, Annotation)> {
    render_scene_with_layout(p, seed).map(|(img, ann, _)| (img, ann))
}

/// [`render_scene`] that also reports where the opacity and speculars landed.
pub fn render_scene_with_layout(
    p: &SceneParams,
    seed: u64,
) -> Result<(RgbImage, Annotation, SceneLayout)> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (p.image_w as usize, p.image_h as usize);
    let lids = Lids::new(p);

    let sclera = lerp3(SCLERA, SCLERA_RED, 0.5 * p.redness_level);
    let mut canvas = Canvas::new(w, h, sclera);
    draw_vessels(&mut canvas, p, &mut rng);
    draw_cornea(&mut canvas, p, &mut rng);
    let (opacity_center, opacity_radius) = place_opacity(p, &lids, &mut rng);
    draw_opacity(&mut canvas, p, opacity_center, opacity_radius);
    let speculars = place_speculars(p, &lids, &mut rng);
    for s in &speculars {
        draw_specular(&mut canvas, p, s);
    }
    draw_lids(&mut canvas, &lids);

    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let mut img = RgbImage::new(p.image_w, p.image_h);
    for (i, px) in canvas.px.iter().enumerate() {
        let mut out = [0u8; 3];
        for c in 0..3 {
            let v = px[c] * p.illumination_gain + noise.sample(&mut rng);
            out[c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        img.put_pixel((i % w) as u32, (i / w) as u32, Rgb(out));
    }

    let (cx, cy) = p.cornea_center();
    let r = p.cornea_radius;
    let bbox = BoundingBox::new(cx - r, cy - r, cx + r, cy + r)?.clamp_to(w as f64, h as f64);
    let annotation = Annotation {
        path: String::new(),
        width: p.image_w,
        height: p.image_h,
        bbox,
        label: p.true_class,
        image_seed: Some(seed),
        scene: Some(*p),
        fixture: None,
    };
    let layout = SceneLayout {
        cornea_center: (cx, cy),
        opacity_center,
        opacity_radius,
        speculars,
    };
    Ok((img, annotation, layout))
}
