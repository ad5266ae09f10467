use serde::{Deserialize, Serialize};

use super::gray::GrayImage;
use super::limbus::LimbusCircle;
use super::DetectorConfig;

/// Opacity evidence inside a cornea disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpacityStats {
    /// Fraction of measured disc pixels flagged opaque.
    pub opacity_area_fraction: f64,
    /// Distance of the opaque centroid from the cornea center, over the
    /// radius. 1 when nothing is flagged.
    pub radial_fraction: f64,
}

impl OpacityStats {
    pub const NONE: OpacityStats = OpacityStats {
        opacity_area_fraction: 0.0,
        radial_fraction: 1.0,
    };
}

fn median(values: &mut [f32]) -> f32 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    *m
}

/// Flag disc pixels brighter than `median + k * MAD` and summarize where
/// they sit. Only pixels within `inner_disc_fraction` of the radius are
/// measured so limbus blur and a slightly oversized circle cannot leak
/// sclera into the sample.
pub fn measure_opacity(img: &GrayImage, c: &LimbusCircle, cfg: &DetectorConfig) -> OpacityStats {
    let smoothed = img.gaussian_blur(cfg.blur_sigma);
    measure_smoothed(&smoothed, c, cfg)
}

pub(crate) fn measure_smoothed(img: &GrayImage, c: &LimbusCircle, cfg: &DetectorConfig) -> OpacityStats {
    let reach = cfg.inner_disc_fraction * c.radius;
    let x0 = (c.center_x - reach).floor().max(0.0) as usize;
    let y0 = (c.center_y - reach).floor().max(0.0) as usize;
    let x1 = ((c.center_x + reach).ceil().max(0.0) as usize).min(img.width());
    let y1 = ((c.center_y + reach).ceil().max(0.0) as usize).min(img.height());

    let mut pixels = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            if (fx - c.center_x).hypot(fy - c.center_y) <= reach {
                pixels.push((fx, fy, img.get(x, y)));
            }
        }
    }
    if pixels.is_empty() {
        return OpacityStats::NONE;
    }

    let mut values: Vec<f32> = pixels.iter().map(|p| p.2).collect();
    let med = median(&mut values);
    let mut dev: Vec<f32> = values.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let threshold = med + cfg.mad_multiplier as f32 * mad;

    let (mut n, mut sx, mut sy) = (0usize, 0.0f64, 0.0f64);
    for &(fx, fy, v) in &pixels {
        if v > threshold {
            n += 1;
            sx += fx;
            sy += fy;
        }
    }
    if n == 0 {
        return OpacityStats::NONE;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    OpacityStats {
        opacity_area_fraction: n as f64 / pixels.len() as f64,
        radial_fraction: ((mx - c.center_x).hypot(my - c.center_y) / c.radius).clamp(0.0, 1.0),
    }
}
