use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ClassLabel;

/// Largest opacity radial fraction an infective scene may carry.
pub const INFECTIVE_MAX_RHO: f64 = 0.35;
/// Smallest opacity radial fraction a non-infective scene may carry.
pub const NON_INFECTIVE_MIN_RHO: f64 = 0.65;

/// Controls for one rendered anterior-eye scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub image_w: u32,
    pub image_h: u32,
    /// Cornea center offset from the image center, px.
    pub eye_offset: (f64, f64),
    pub cornea_radius: f64,
    pub eyelid_open_fraction: f64,
    pub illumination_gain: f64,
    pub redness_level: f64,
    pub opacity_radial_fraction: f64,
    pub opacity_size_fraction: f64,
    pub specular_count: u32,
    pub specular_intensity: f64,
    pub true_class: ClassLabel,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            image_w: 256,
            image_h: 192,
            eye_offset: (0.0, 0.0),
            cornea_radius: 55.0,
            eyelid_open_fraction: 1.0,
            illumination_gain: 1.0,
            redness_level: 0.5,
            opacity_radial_fraction: 0.0,
            opacity_size_fraction: 0.25,
            specular_count: 0,
            specular_intensity: 0.0,
            true_class: ClassLabel::InfectiveCornea,
        }
    }
}

impl SceneParams {
    /// Cornea center in pixel coordinates.
    pub fn cornea_center(&self) -> (f64, f64) {
        (
            self.image_w as f64 / 2.0 + self.eye_offset.0,
            self.image_h as f64 / 2.0 + self.eye_offset.1,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} {v} outside [0, 1]")))
            }
        };
        if self.image_w == 0 || self.image_h == 0 {
            return bad(format!("empty image {}x{}", self.image_w, self.image_h));
        }
        if !(self.eye_offset.0.is_finite() && self.eye_offset.1.is_finite()) {
            return bad("non-finite eye offset".into());
        }
        if !(self.cornea_radius.is_finite() && self.cornea_radius > 0.0) {
            return bad(format!("cornea radius {} must be positive", self.cornea_radius));
        }
        unit("eyelid_open_fraction", self.eyelid_open_fraction)?;
        unit("redness_level", self.redness_level)?;
        unit("opacity_radial_fraction", self.opacity_radial_fraction)?;
        unit("specular_intensity", self.specular_intensity)?;
        if !(self.illumination_gain.is_finite() && self.illumination_gain > 0.0) {
            return bad(format!(
                "illumination gain {} must be positive",
                self.illumination_gain
            ));
        }
        if !(self.opacity_size_fraction > 0.0 && self.opacity_size_fraction <= 0.5) {
            return bad(format!(
                "opacity size fraction {} outside (0, 0.5]",
                self.opacity_size_fraction
            ));
        }
        let rho = self.opacity_radial_fraction;
        match self.true_class {
            ClassLabel::InfectiveCornea if rho > INFECTIVE_MAX_RHO => {
                return bad(format!("infective scene needs rho <= {INFECTIVE_MAX_RHO}, got {rho}"))
            }
            ClassLabel::NonInfectiveCornea if rho < NON_INFECTIVE_MIN_RHO => {
                return bad(format!(
                    "non-infective scene needs rho >= {NON_INFECTIVE_MIN_RHO}, got {rho}"
                ))
            }
            _ => {}
        }
        // the disc must overlap the image
        let (cx, cy) = self.cornea_center();
        let r = self.cornea_radius;
        let nx = cx.clamp(0.0, self.image_w as f64);
        let ny = cy.clamp(0.0, self.image_h as f64);
        if (nx - cx).hypot(ny - cy) >= r {
            return bad("cornea disc lies outside the image".into());
        }
        Ok(())
    }
}

/// Inclusive uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }
}

/// Sampling ranges used by [`super::sample_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub image_w: u32,
    pub image_h: u32,
    /// Maximum center offset as a fraction of each image dimension.
    pub offset_fraction: f64,
    /// Cornea radius as a fraction of the smaller image dimension.
    pub radius_fraction: Range,
    pub eyelid_open: Range,
    pub illumination_gain: Range,
    pub redness_infective: Range,
    pub redness_non_infective: Range,
    pub rho_infective: Range,
    pub rho_non_infective: Range,
    pub opacity_size: Range,
    pub specular_count: u32,
    pub specular_intensity: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            image_w: 256,
            image_h: 192,
            offset_fraction: 0.15,
            radius_fraction: Range::new(0.20, 0.35),
            eyelid_open: Range::new(0.6, 1.0),
            illumination_gain: Range::new(0.6, 1.4),
            redness_infective: Range::new(0.5, 1.0),
            redness_non_infective: Range::new(0.0, 1.0),
            rho_infective: Range::new(0.0, INFECTIVE_MAX_RHO),
            rho_non_infective: Range::new(NON_INFECTIVE_MIN_RHO, 1.0),
            opacity_size: Range::new(0.15, 0.30),
            specular_count: 0,
            specular_intensity: 0.0,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("radius_fraction", self.radius_fraction),
            ("eyelid_open", self.eyelid_open),
            ("illumination_gain", self.illumination_gain),
            ("redness_infective", self.redness_infective),
            ("redness_non_infective", self.redness_non_infective),
            ("rho_infective", self.rho_infective),
            ("rho_non_infective", self.rho_non_infective),
            ("opacity_size", self.opacity_size),
        ];
        for (name, r) in ranges {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                return Err(Error::InvalidParams(format!(
                    "range {name} [{}, {}] is not ordered",
                    r.min, r.max
                )));
            }
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::InvalidParams("empty image size".into()));
        }
        if !(0.0..=0.5).contains(&self.offset_fraction) {
            return Err(Error::InvalidParams(format!(
                "offset fraction {} outside [0, 0.5]",
                self.offset_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.specular_intensity) {
            return Err(Error::InvalidParams(format!(
                "specular intensity {} outside [0, 1]",
                self.specular_intensity
            )));
        }
        Ok(())
    }
}
