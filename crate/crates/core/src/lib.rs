//! Anatomical-structure-focused classification of anterior-eye images.
//!
//! An image is labelled by detecting its cornea: detector output (decoded
//! YOLO-style head tensors, or the built-in [`detector::ReferenceDetector`])
//! goes through greedy NMS, the single highest-objectness survivor is kept,
//! and its class becomes the image label. No survivor means the image is
//! not classified.
//!
//! The crate also ships a procedural scene generator ([`synth`]) with exact
//! ground truth, and a stratified k-fold evaluation harness ([`eval`])
//! producing a 2x3 confusion matrix (two truths by three outcomes).

pub mod classifier;
pub mod decode;
pub mod detector;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod pipeline;
pub mod suppression;
pub mod synth;

pub use classifier::{classify_image, ImageDecision, Verdict};
pub use decode::{decode_cell, decode_head, sigmoid, Anchor, Detection, HeadTensor};
pub use error::{Error, ErrorKind, Result};
pub use eval::{ConfusionMatrix2x3, FoldAssignment};
pub use geometry::{area, iou, BoundingBox, ClassLabel};
pub use detector::{DetectorConfig, ReferenceDetector};
pub use pipeline::{DetectorSource, PipelineConfig};
pub use suppression::{nms_greedy, winner_take_all};
pub use synth::{Annotation, DatasetManifest, SceneParams};
