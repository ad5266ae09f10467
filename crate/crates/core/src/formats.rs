//! On-disk documents.
//!
//! Every document is a JSON object carrying a top-level `format_version`
//! (`"MAJOR.MINOR"`) and a `kind` tag next to its body fields. Readers
//! reject documents whose major version differs from [`FORMAT_MAJOR`] or
//! whose kind does not match the expected one. All writes go to a temporary
//! sibling file which is then renamed over the target.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{ImageDecision, Verdict};
use crate::decode::{Detection, HeadTensor};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix2x3;
use crate::geometry::ClassLabel;

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

/// A top-level document type.
pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;

    /// Cross-field consistency checks run after parsing.
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    format_version: &'a str,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn check_version(found: &str) -> Result<()> {
    let major = found
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(FORMAT_MAJOR) => Ok(()),
        _ => Err(Error::UnsupportedVersion {
            found: found.to_string(),
            supported: FORMAT_MAJOR,
        }),
    }
}

/// The `kind` tag of a parsed document, after the version check.
pub fn document_kind(value: &Value) -> Result<&str> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Format("document is not a JSON object".into()))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format("missing format_version".into()))?;
    check_version(version)?;
    obj.get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format("missing kind".into()))
}

/// Decode a document from an already-parsed JSON value.
pub fn from_value<T: Document>(mut value: Value) -> Result<T> {
    let kind = document_kind(&value)?;
    if kind != T::KIND {
        return Err(Error::Format(format!(
            "expected a {} document, found {kind:?}",
            T::KIND
        )));
    }
    let obj = value.as_object_mut().expect("checked above");
    obj.remove("format_version");
    obj.remove("kind");
    let doc: T = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    doc.check()?;
    Ok(doc)
}

pub fn from_str<T: Document>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    from_value(value)
}

pub fn to_string<T: Document>(doc: &T) -> Result<String> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        kind: T::KIND,
        body: doc,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_document<T: Document>(path: &Path) -> Result<T> {
    from_value(read_json(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_document<T: Document>(path: &Path, doc: &T) -> Result<()> {
    write_atomic(path, to_string(doc)?.as_bytes())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Write `bytes` to a temporary sibling and rename it onto `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_atomic(path, &buf)
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes)
        .map(|i| i.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Raw detection-head output for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFixture {
    pub image: String,
    pub image_width: u32,
    pub image_height: u32,
    pub heads: Vec<HeadTensor>,
}

impl Document for TensorFixture {
    const KIND: &'static str = "tensor_fixture";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub image: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<ClassLabel>,
    pub detections: Vec<Detection>,
}

/// Detector output for a set of images, before suppression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsDocument {
    pub images: Vec<ImageDetections>,
}

impl Document for DetectionsDocument {
    const KIND: &'static str = "detections";

    fn check(&self) -> Result<()> {
        for img in &self.images {
            for d in &img.detections {
                d.validate()
                    .map_err(|e| Error::Format(format!("{}: {e}", img.image)))?;
            }
        }
        Ok(())
    }
}

/// One image-level decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<ClassLabel>,
    pub decision: Verdict,
    pub objectness: Option<f64>,
    pub winner: Option<Detection>,
}

impl DecisionRecord {
    pub fn new(image: impl Into<String>, ground_truth: Option<ClassLabel>, d: &ImageDecision) -> Self {
        Self {
            image: image.into(),
            ground_truth,
            decision: d.verdict(),
            objectness: d.objectness(),
            winner: d.winner().copied(),
        }
    }

    pub fn to_decision(&self) -> ImageDecision {
        ImageDecision::from_winner(self.winner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionsDocument {
    pub detector: String,
    pub objectness_threshold: f64,
    pub nms_iou_threshold: f64,
    pub records: Vec<DecisionRecord>,
}

impl Document for DecisionsDocument {
    const KIND: &'static str = "decisions";

    fn check(&self) -> Result<()> {
        for r in &self.records {
            let consistent = match (&r.winner, r.decision) {
                (None, Verdict::NotClassified) => r.objectness.is_none(),
                (Some(w), v) => {
                    Verdict::from(w.label) == v && r.objectness == Some(w.objectness)
                }
                (None, _) => false,
            };
            if !consistent {
                return Err(Error::Format(format!(
                    "{}: decision {} disagrees with its winning detection",
                    r.image, r.decision
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub folds: usize,
    pub stratified: bool,
    pub objectness_threshold: f64,
    pub nms_iou_threshold: f64,
    pub detector: String,
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_images: usize,
    pub matrix: ConfusionMatrix2x3,
}

/// Cross-validation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: RunMetadata,
    pub folds: Vec<FoldReport>,
    pub pooled: ConfusionMatrix2x3,
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub recall_infective: Option<f64>,
    pub recall_non_infective: Option<f64>,
}

impl Document for EvaluationReport {
    const KIND: &'static str = "evaluation_report";

    fn check(&self) -> Result<()> {
        let summed = self
            .folds
            .iter()
            .fold(ConfusionMatrix2x3::default(), |acc, f| acc + f.matrix);
        if !self.folds.is_empty() && summed != self.pooled {
            return Err(Error::Format(
                "pooled matrix is not the sum of the fold matrices".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the per-image CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImageRow {
    pub path: String,
    pub fold: Option<usize>,
    pub ground_truth: ClassLabel,
    pub decision: Verdict,
    pub objectness: Option<f64>,
}

pub fn per_image_csv(rows: &[PerImageRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|source| Error::Csv {
            path: PathBuf::from("<per-image csv>"),
            source,
        })?;
    }
    w.into_inner()
        .map_err(|e| Error::Format(format!("csv flush: {e}")))
}

pub fn read_per_image_csv(path: &Path) -> Result<Vec<PerImageRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
