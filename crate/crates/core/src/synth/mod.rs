//! Procedural anterior-eye scenes with ground-truth annotations.

mod params;
mod render;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{self, Document};
use crate::geometry::{BoundingBox, ClassLabel};

pub use params::{ParamRanges, Range, SceneParams, INFECTIVE_MAX_RHO, NON_INFECTIVE_MIN_RHO};
pub use render::{render_scene, render_scene_with_layout, SceneLayout, Specular};

/// Directory (relative to the manifest) that holds rendered images.
pub const IMAGE_DIR: &str = "images";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Image path, relative to the manifest's directory.
    pub path: String,
    pub width: u32,
    pub height: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: ClassLabel,
    /// Per-image render seed, when the image was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_seed: Option<u64>,
    /// Generator parameters, when the image was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneParams>,
    /// Tensor fixture standing in for a detector run on this image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub infective: usize,
    pub non_infective: usize,
}

impl ClassCounts {
    pub fn tally<'a>(labels: impl IntoIterator<Item = &'a ClassLabel>) -> Self {
        let mut c = Self::default();
        for l in labels {
            match l {
                ClassLabel::InfectiveCornea => c.infective += 1,
                ClassLabel::NonInfectiveCornea => c.non_infective += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.infective + self.non_infective
    }
}

/// Dataset index: per-image annotations plus how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_ranges: Option<ParamRanges>,
    pub counts: ClassCounts,
    pub records: Vec<Annotation>,
}

impl Document for DatasetManifest {
    const KIND: &'static str = "dataset_manifest";

    fn check(&self) -> Result<()> {
        let tally = ClassCounts::tally(self.records.iter().map(|r| &r.label));
        if tally != self.counts {
            return Err(Error::Format(format!(
                "manifest counts {:?} disagree with records {:?}",
                self.counts, tally
            )));
        }
        for r in &self.records {
            if !r.bbox.is_within(r.width as f64, r.height as f64) {
                return Err(Error::Format(format!("{}: box outside image", r.path)));
            }
        }
        Ok(())
    }
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<ClassLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        formats::read_document(path)
    }
}

/// splitmix64 finalizer; derives independent per-image seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for image `index` of a dataset generated with `seed`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    mix(mix(seed) ^ index as u64)
}

fn draw(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r.max > r.min {
        rng.random_range(r.min..=r.max)
    } else {
        r.min
    }
}

/// Draw scene parameters for one image.
pub fn sample_scene(ranges: &ParamRanges, label: ClassLabel, image_seed: u64) -> SceneParams {
    let mut rng = ChaCha8Rng::seed_from_u64(image_seed);
    rng.set_stream(1);
    let (w, h) = (ranges.image_w as f64, ranges.image_h as f64);
    let dx = ranges.offset_fraction * w * rng.random_range(-1.0..=1.0);
    let dy = ranges.offset_fraction * h * rng.random_range(-1.0..=1.0);
    let radius = draw(&mut rng, ranges.radius_fraction) * w.min(h);
    let (redness, rho) = match label {
        ClassLabel::InfectiveCornea => (ranges.redness_infective, ranges.rho_infective),
        ClassLabel::NonInfectiveCornea => (ranges.redness_non_infective, ranges.rho_non_infective),
    };
    SceneParams {
        image_w: ranges.image_w,
        image_h: ranges.image_h,
        eye_offset: (dx, dy),
        cornea_radius: radius,
        eyelid_open_fraction: draw(&mut rng, ranges.eyelid_open),
        illumination_gain: draw(&mut rng, ranges.illumination_gain),
        redness_level: draw(&mut rng, redness),
        opacity_radial_fraction: draw(&mut rng, rho),
        opacity_size_fraction: draw(&mut rng, ranges.opacity_size),
        specular_count: ranges.specular_count,
        specular_intensity: ranges.specular_intensity,
        true_class: label,
    }
}

/// Plan a dataset: infective images first, then non-infective, each with
/// sampled parameters and an annotation. Pure; nothing is written.
pub fn sample_dataset(
    n_infective: usize,
    n_non_infective: usize,
    seed: u64,
    ranges: &ParamRanges,
) -> Result<DatasetManifest> {
    ranges.validate()?;
    let labels = std::iter::repeat_n(ClassLabel::InfectiveCornea, n_infective)
        .chain(std::iter::repeat_n(ClassLabel::NonInfectiveCornea, n_non_infective));
    let records = labels
        .enumerate()
        .map(|(i, label)| {
            let s = image_seed(seed, i);
            let scene = sample_scene(ranges, label, s);
            scene.validate()?;
            let (cx, cy) = scene.cornea_center();
            let r = scene.cornea_radius;
            let bbox = BoundingBox::new(cx - r, cy - r, cx + r, cy + r)?
                .clamp_to(scene.image_w as f64, scene.image_h as f64);
            Ok(Annotation {
                path: format!("{IMAGE_DIR}/img_{i:04}.png"),
                width: scene.image_w,
                height: scene.image_h,
                bbox,
                label,
                image_seed: Some(s),
                scene: Some(scene),
                fixture: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetManifest {
        seed,
        param_ranges: Some(ranges.clone()),
        counts: ClassCounts {
            infective: n_infective,
            non_infective: n_non_infective,
        },
        records,
    })
}

/// Render every record of a planned dataset into `out_dir` and write the
/// manifest next to the images. Returns the manifest path.
pub fn write_dataset(manifest: &DatasetManifest, out_dir: &Path) -> Result<std::path::PathBuf> {
    let image_dir = out_dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    manifest.records.par_iter().try_for_each(|rec| {
        let (scene, seed) = match (rec.scene, rec.image_seed) {
            (Some(s), Some(seed)) => (s, seed),
            _ => {
                return Err(Error::Format(format!(
                    "{}: record carries no generator parameters",
                    rec.path
                )))
            }
        };
        let (img, ann) = render_scene(&scene, seed)?;
        if ann.bbox != rec.bbox || ann.label != rec.label {
            return Err(Error::Invariant(format!(
                "{}: rendered annotation disagrees with plan",
                rec.path
            )));
        }
        formats::write_png(&out_dir.join(&rec.path), &img)
    })?;
    let path = out_dir.join(MANIFEST_FILE);
    formats::write_document(&path, manifest)?;
    Ok(path)
}

/// [`sample_dataset`] followed by [`write_dataset`].
pub fn generate_dataset(
    n_infective: usize,
    n_non_infective: usize,
    seed: u64,
    ranges: &ParamRanges,
    out_dir: &Path,
) -> Result<(DatasetManifest, std::path::PathBuf)> {
    let manifest = sample_dataset(n_infective, n_non_infective, seed, ranges)?;
    let path = write_dataset(&manifest, out_dir)?;
    Ok((manifest, path))
}
