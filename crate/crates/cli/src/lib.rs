//! Subcommand implementations behind the `cornea` binary.
//!
//! Each `cmd_*` function does the work of one subcommand and returns what
//! it wrote; printing and exit codes are left to `main`.

use std::path::{Path, PathBuf};

use cornea_core::formats::{
    self, DecisionRecord, DecisionsDocument, DetectionsDocument, Document, ImageDetections,
    TensorFixture,
};
use cornea_core::pipeline::{self, DetectorSource, Evaluation, PipelineConfig};
use cornea_core::synth::{self, DatasetManifest, ParamRanges};
use cornea_core::{Error, ReferenceDetector, Result};

pub const REPORT_FILE: &str = "report.json";
pub const CSV_FILE: &str = "per_image.csv";

/// Options of `cornea synth`.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub count_infective: usize,
    pub count_non_infective: usize,
    pub seed: u64,
    pub specular_count: u32,
    pub specular_intensity: f64,
    pub out_dir: PathBuf,
}

/// Generate a dataset; returns the manifest and its path.
pub fn cmd_synth(opts: &SynthOptions) -> Result<(DatasetManifest, PathBuf)> {
    let ranges = ParamRanges {
        specular_count: opts.specular_count,
        specular_intensity: opts.specular_intensity,
        ..ParamRanges::default()
    };
    synth::generate_dataset(
        opts.count_infective,
        opts.count_non_infective,
        opts.seed,
        &ranges,
        &opts.out_dir,
    )
}

/// Result of `cornea classify`. Records that failed are listed separately;
/// the command only fails outright when every input fails.
#[derive(Debug)]
pub struct ClassifyOutcome {
    pub document: DecisionsDocument,
    pub failures: Vec<Error>,
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Classify a manifest, a single PNG, a tensor fixture or a detections
/// document, and write the decisions document to `out`.
pub fn cmd_classify(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<ClassifyOutcome> {
    cfg.validate()?;
    let (detector, results) = if is_png(input) {
        if cfg.detector != DetectorSource::Reference {
            return Err(Error::Config(format!(
                "{}: a bare image needs the reference detector",
                input.display()
            )));
        }
        let img = formats::read_png(input)?;
        let dets = ReferenceDetector::new(cfg.reference.clone()).detect(&img);
        let d = cfg.decide(&dets)?;
        let name = input.to_string_lossy().into_owned();
        (cfg.detector.to_string(), vec![Ok(DecisionRecord::new(name, None, &d))])
    } else {
        let value = formats::read_json(input)?;
        let kind = formats::document_kind(&value)?.to_owned();
        match kind.as_str() {
            k if k == DatasetManifest::KIND => {
                let m: DatasetManifest = formats::from_value(value)?;
                let rs = pipeline::classify_manifest(cfg, &m, parent_dir(input));
                (cfg.detector.to_string(), rs)
            }
            k if k == TensorFixture::KIND => {
                let fx: TensorFixture = formats::from_value(value)?;
                let d = cfg.decide(&pipeline::decode_fixture(&fx, cfg.objectness_threshold)?)?;
                let rec = DecisionRecord::new(fx.image.clone(), None, &d);
                (DetectorSource::FixtureDecode.to_string(), vec![Ok(rec)])
            }
            k if k == DetectionsDocument::KIND => {
                let doc: DetectionsDocument = formats::from_value(value)?;
                let rs = doc
                    .images
                    .iter()
                    .map(|img| {
                        let d = cfg.decide(&img.detections)?;
                        Ok(DecisionRecord::new(img.image.clone(), img.ground_truth, &d))
                    })
                    .collect();
                ("detections".to_owned(), rs)
            }
            other => {
                return Err(Error::Format(format!(
                    "{}: cannot classify a {other:?} document",
                    input.display()
                )))
            }
        }
    };
    let total = results.len();
    let (mut records, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(e),
        }
    }
    if total > 0 && records.is_empty() {
        return Err(Error::Batch(failures));
    }
    let document = DecisionsDocument {
        detector,
        objectness_threshold: cfg.objectness_threshold,
        nms_iou_threshold: cfg.nms_iou_threshold,
        records,
    };
    formats::write_document(out, &document)?;
    Ok(ClassifyOutcome { document, failures })
}

/// Result of `cornea evaluate`.
#[derive(Debug)]
pub struct EvaluateOutcome {
    pub evaluation: Evaluation,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Cross-validate a manifest (running the configured detector) or replay a
/// decisions document, writing the report and per-image CSV into `out_dir`.
pub fn cmd_evaluate(input: &Path, cfg: &PipelineConfig, k: usize, out_dir: &Path) -> Result<EvaluateOutcome> {
    cfg.validate()?;
    let value = formats::read_json(input)?;
    let kind = formats::document_kind(&value)?.to_owned();
    let evaluation = match kind.as_str() {
        k_ if k_ == DatasetManifest::KIND => {
            let m: DatasetManifest = formats::from_value(value)?;
            pipeline::evaluate_manifest(cfg, &m, parent_dir(input), k)?
        }
        k_ if k_ == DecisionsDocument::KIND => {
            let doc: DecisionsDocument = formats::from_value(value)?;
            pipeline::evaluate_decisions(&doc, k, cfg.seed)?
        }
        other => {
            return Err(Error::Format(format!(
                "{}: cannot evaluate a {other:?} document",
                input.display()
            )))
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let report_path = out_dir.join(REPORT_FILE);
    let csv_path = out_dir.join(CSV_FILE);
    formats::write_document(&report_path, &evaluation.report)?;
    formats::write_atomic(&csv_path, &formats::per_image_csv(&evaluation.rows)?)?;
    Ok(EvaluateOutcome {
        evaluation,
        report_path,
        csv_path,
    })
}

/// Decode tensor fixtures into a detections document (no suppression).
pub fn cmd_decode(inputs: &[PathBuf], objectness_threshold: f64, out: &Path) -> Result<DetectionsDocument> {
    if inputs.is_empty() {
        return Err(Error::Config("no fixtures given".into()));
    }
    let images = inputs
        .iter()
        .map(|p| {
            let fx: TensorFixture = formats::read_document(p)?;
            Ok(ImageDetections {
                image: fx.image.clone(),
                width: fx.image_width,
                height: fx.image_height,
                ground_truth: None,
                detections: pipeline::decode_fixture(&fx, objectness_threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = DetectionsDocument { images };
    formats::write_document(out, &doc)?;
    Ok(doc)
}

/// Accuracy as printed by `cornea evaluate`, e.g. `88.3%`.
pub fn percent(accuracy: f64) -> String {
    format!("{:.1}%", 100.0 * accuracy)
}
