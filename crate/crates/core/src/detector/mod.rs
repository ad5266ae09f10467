//! Training-free reference cornea detector.
//!
//! Finds the limbus circle, measures where bright (opaque) tissue sits
//! inside it, and emits a single cornea detection whose class follows the
//! opacity position: central opacity reads as infective, marginal opacity
//! as non-infective.

mod gray;
mod limbus;
mod opacity;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::decode::{sigmoid, Detection};
use crate::geometry::{BoundingBox, ClassLabel};

pub use gray::{Gradient, GrayImage};
pub use limbus::{detect_limbus, LimbusCircle, MIN_IMAGE_SIDE};
pub use opacity::{measure_opacity, OpacityStats};

use limbus::{find_limbus, Prepared};

/// Tunables of the reference detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Gaussian pre-smoothing, px.
    pub blur_sigma: f32,
    /// Minimum gradient magnitude (intensity per px) for an edge pixel.
    pub edge_threshold: f32,
    /// Admissible limbus radius range, as fractions of the smaller side.
    pub radius_min_fraction: f64,
    pub radius_max_fraction: f64,
    /// Smoothing of the center accumulator, px.
    pub accumulator_sigma: f32,
    /// Minimum cosine between gradient and radial direction for radius votes.
    pub alignment_min: f64,
    /// Same, for lateral-arc support samples.
    pub support_alignment_min: f64,
    /// Half-width of each lateral support arc, degrees.
    pub lateral_half_angle_deg: f64,
    /// Minimum normalized support for a circle to be reported.
    pub vote_acceptance: f64,
    /// Opaque pixels are brighter than `median + mad_multiplier * MAD`.
    pub mad_multiplier: f64,
    /// Fraction of the radius actually measured for opacity.
    pub inner_disc_fraction: f64,
    /// Radial fraction at which both classes score 0.5.
    pub class_boundary: f64,
    /// Width of the class logistic.
    pub class_logistic_width: f64,
    /// Opacity area fraction at which the evidence factor saturates.
    pub opacity_evidence_floor: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            edge_threshold: 0.03,
            radius_min_fraction: 0.10,
            radius_max_fraction: 0.45,
            accumulator_sigma: 1.5,
            alignment_min: 0.9,
            support_alignment_min: 0.8,
            lateral_half_angle_deg: 25.0,
            vote_acceptance: 0.2,
            mad_multiplier: 2.5,
            inner_disc_fraction: 0.95,
            class_boundary: 0.5,
            class_logistic_width: 0.1,
            opacity_evidence_floor: 0.05,
        }
    }
}

/// Per-class scores derived from opacity position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub infective: f64,
    pub non_infective: f64,
}

impl ClassScores {
    /// Best label and its score; ties go to the lower class code.
    pub fn best(&self) -> (ClassLabel, f64) {
        if self.infective >= self.non_infective {
            (ClassLabel::InfectiveCornea, self.infective)
        } else {
            (ClassLabel::NonInfectiveCornea, self.non_infective)
        }
    }
}

/// Central opacity scores infective, marginal opacity non-infective.
pub fn score_classes(s: &OpacityStats, cfg: &DetectorConfig) -> ClassScores {
    let infective = sigmoid((cfg.class_boundary - s.radial_fraction) / cfg.class_logistic_width);
    ClassScores {
        infective,
        non_infective: 1.0 - infective,
    }
}

/// Result of running every detector stage on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub limbus: Option<LimbusCircle>,
    pub opacity: Option<OpacityStats>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceDetector {
    pub config: DetectorConfig,
}

impl ReferenceDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self { config }
    }

    /// Zero or one cornea detection for an RGB image.
    pub fn detect(&self, img: &RgbImage) -> Vec<Detection> {
        self.analyze(img).detections
    }

    pub fn analyze(&self, img: &RgbImage) -> Analysis {
        self.analyze_gray(&GrayImage::from_rgb(img))
    }

    pub fn analyze_gray(&self, gray: &GrayImage) -> Analysis {
        let cfg = &self.config;
        let prep = Prepared::new(gray, cfg);
        let Some(circle) = find_limbus(&prep, cfg) else {
            return Analysis {
                limbus: None,
                opacity: None,
                detections: Vec::new(),
            };
        };
        let stats = opacity::measure_smoothed(&prep.smoothed, &circle, cfg);
        let (label, class_prob) = score_classes(&stats, cfg).best();
        let evidence = (stats.opacity_area_fraction / cfg.opacity_evidence_floor).min(1.0);
        let objectness = (circle.vote_strength * (0.5 + 0.5 * evidence)).clamp(0.0, 1.0);
        let (w, h) = (gray.width() as f64, gray.height() as f64);
        let r = circle.radius;
        let bbox = BoundingBox::new(
            circle.center_x - r,
            circle.center_y - r,
            circle.center_x + r,
            circle.center_y + r,
        )
        .map(|b| b.clamp_to(w, h));
        let detections = match bbox {
            Ok(bbox) => vec![Detection {
                bbox,
                label,
                objectness,
                class_prob,
            }],
            Err(_) => Vec::new(),
        };
        Analysis {
            limbus: Some(circle),
            opacity: Some(stats),
            detections,
        }
    }
}
