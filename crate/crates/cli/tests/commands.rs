use std::path::Path;
use std::process::{Command, Output};

use cornea_core::decode::{Anchor, HeadTensor};
use cornea_core::formats::{self, DecisionsDocument, DetectionsDocument, EvaluationReport, TensorFixture};
use cornea_core::{DatasetManifest, Verdict};

fn cornea(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cornea"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A single-cell head whose only slot has the given objectness and class logits.
fn fixture(t_obj: f64, logits: (f64, f64)) -> TensorFixture {
    let head = HeadTensor::new(
        1,
        1,
        32.0,
        vec![Anchor { w: 80.0, h: 80.0 }],
        2,
        vec![0.2, -0.3, 0.1, 0.4, t_obj, logits.0, logits.1],
    )
    .unwrap();
    TensorFixture {
        image: "eye.png".into(),
        image_width: 256,
        image_height: 192,
        heads: vec![head],
    }
}

#[test]
fn fixture_without_boxes_is_not_classified() {
    let dir = tempfile::tempdir().unwrap();
    formats::write_document(&dir.path().join("fx.json"), &fixture(-3.0, (2.0, -1.0))).unwrap();
    let o = cornea(dir.path(), &["classify", "fx.json", "--detector", "fixture-decode"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let doc: DecisionsDocument = formats::read_document(&dir.path().join("decisions.json")).unwrap();
    assert_eq!(doc.records.len(), 1);
    assert_eq!(doc.records[0].decision, Verdict::NotClassified);
    assert!(stdout(&o).contains("not_classified"));
}

#[test]
fn fixture_with_one_infective_box() {
    let dir = tempfile::tempdir().unwrap();
    formats::write_document(&dir.path().join("fx.json"), &fixture(1.5, (2.0, -1.0))).unwrap();
    let o = cornea(dir.path(), &["classify", "fx.json", "--out", "d.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let doc: DecisionsDocument = formats::read_document(&dir.path().join("d.json")).unwrap();
    assert_eq!(doc.records[0].decision, Verdict::Infective);
}

#[test]
fn decode_then_classify_detections() {
    let dir = tempfile::tempdir().unwrap();
    formats::write_document(&dir.path().join("a.json"), &fixture(1.5, (-2.0, 1.0))).unwrap();
    formats::write_document(&dir.path().join("b.json"), &fixture(-2.0, (-2.0, 1.0))).unwrap();
    let o = cornea(dir.path(), &["decode", "a.json", "b.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let dets: DetectionsDocument = formats::read_document(&dir.path().join("detections.json")).unwrap();
    assert_eq!(dets.images.iter().map(|i| i.detections.len()).collect::<Vec<_>>(), [1, 0]);
    let o = cornea(dir.path(), &["classify", "detections.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let doc: DecisionsDocument = formats::read_document(&dir.path().join("decisions.json")).unwrap();
    let verdicts: Vec<Verdict> = doc.records.iter().map(|r| r.decision).collect();
    assert_eq!(verdicts, [Verdict::NonInfective, Verdict::NotClassified]);
}

#[test]
fn manifest_classify_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cornea(d, &["synth", "--count-infective", "5", "--count-noninfective", "5", "--seed", "3", "--out", "ds"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let manifest = DatasetManifest::load(&d.join("ds/manifest.json")).unwrap();
    assert_eq!(manifest.records.len(), 10);

    let o = cornea(d, &["classify", "ds/manifest.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let doc: DecisionsDocument = formats::read_document(&d.join("decisions.json")).unwrap();
    let images: Vec<&str> = doc.records.iter().map(|r| r.image.as_str()).collect();
    let paths: Vec<&str> = manifest.records.iter().map(|r| r.path.as_str()).collect();
    assert_eq!(images, paths);
    let text = std::fs::read_to_string(d.join("decisions.json")).unwrap();
    assert_eq!(formats::from_str::<DecisionsDocument>(&text).unwrap(), doc);

    let o = cornea(d, &["evaluate", "decisions.json", "--folds", "5", "--out", "replay"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let o2 = cornea(d, &["evaluate", "ds/manifest.json", "--folds", "5", "--out", "live"]);
    assert_eq!(code(&o2), 0, "{o2:?}");
    let replay: EvaluationReport = formats::read_document(&d.join("replay/report.json")).unwrap();
    let live: EvaluationReport = formats::read_document(&d.join("live/report.json")).unwrap();
    assert_eq!(replay.pooled, live.pooled);
    assert_eq!(replay.folds, live.folds);
    let rows = formats::read_per_image_csv(&d.join("live/per_image.csv")).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(stdout(&o2).starts_with("pooled accuracy: "));
}

#[test]
fn empty_dataset_synthesizes_but_cannot_be_evaluated() {
    let dir = tempfile::tempdir().unwrap();
    let o = cornea(dir.path(), &["synth", "--count-infective", "0", "--count-noninfective", "0", "--out", "e"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let o = cornea(dir.path(), &["evaluate", "e/manifest.json"]);
    assert_eq!(code(&o), 1, "{o:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&cornea(d, &["frobnicate"])), 1);
    assert_eq!(code(&cornea(d, &["classify", "missing.json"])), 2);
    std::fs::write(d.join("future.json"), r#"{"format_version": "2.0", "kind": "decisions"}"#).unwrap();
    assert_eq!(code(&cornea(d, &["evaluate", "future.json"])), 2);
    formats::write_document(&d.join("fx.json"), &fixture(1.0, (1.0, 0.0))).unwrap();
    assert_eq!(code(&cornea(d, &["classify", "fx.json", "--objectness-threshold", "1.5"])), 1);
    assert_eq!(code(&cornea(d, &["classify", "fx.json", "--detector", "cnn"])), 1);
    assert_eq!(code(&cornea(d, &["evaluate", "fx.json"])), 2);
}
