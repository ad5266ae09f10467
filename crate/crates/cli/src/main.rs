use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cornea_cli::{cmd_classify, cmd_decode, cmd_evaluate, cmd_synth, percent, SynthOptions};
use cornea_core::decode::DEFAULT_OBJECTNESS_THRESHOLD;
use cornea_core::eval::DEFAULT_FOLDS;
use cornea_core::suppression::DEFAULT_NMS_IOU;
use cornea_core::{DetectorConfig, DetectorSource, Error, ErrorKind, PipelineConfig};

/// Cornea detection and image-level infective / non-infective classification.
#[derive(Parser)]
#[command(name = "cornea", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic anterior-eye dataset.
    Synth {
        #[arg(long, default_value_t = 100)]
        count_infective: usize,
        #[arg(long, default_value_t = 96)]
        count_noninfective: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Specular highlights per image.
        #[arg(long, default_value_t = 0)]
        specular_count: u32,
        #[arg(long, default_value_t = 0.0)]
        specular_intensity: f64,
        /// Output directory (manifest.json plus images/).
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Classify a manifest, a PNG image, a tensor fixture or a detections document.
    Classify {
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Decisions document to write.
        #[arg(long, default_value = "decisions.json")]
        out: PathBuf,
    },
    /// Stratified k-fold evaluation of a manifest, or replay of a decisions document.
    Evaluate {
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        /// Directory for report.json and per_image.csv.
        #[arg(long, default_value = "evaluation")]
        out: PathBuf,
    },
    /// Decode tensor fixtures into a detections document.
    Decode {
        #[arg(required = true)]
        fixtures: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_OBJECTNESS_THRESHOLD)]
        objectness_threshold: f64,
        #[arg(long, default_value = "detections.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = DEFAULT_OBJECTNESS_THRESHOLD)]
    objectness_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
    nms_iou: f64,
    /// `reference` or `fixture-decode`.
    #[arg(long, default_value = "reference")]
    detector: String,
    /// Fold-assignment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        Ok(PipelineConfig {
            objectness_threshold: self.objectness_threshold,
            nms_iou_threshold: self.nms_iou,
            detector: self.detector.parse::<DetectorSource>()?,
            reference: DetectorConfig::default(),
            seed: self.seed,
        })
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            count_infective,
            count_noninfective,
            seed,
            specular_count,
            specular_intensity,
            out,
        } => {
            let (_, path) = cmd_synth(&SynthOptions {
                count_infective,
                count_non_infective: count_noninfective,
                seed,
                specular_count,
                specular_intensity,
                out_dir: out,
            })?;
            println!("{}", path.display());
        }
        Command::Classify { input, pipeline, out } => {
            let outcome = cmd_classify(&input, &pipeline.config()?, &out)?;
            for e in &outcome.failures {
                eprintln!("warning: {e}");
            }
            for r in &outcome.document.records {
                println!("{}\t{}", r.image, r.decision);
            }
            println!("{}", out.display());
        }
        Command::Evaluate {
            input,
            pipeline,
            folds,
            out,
        } => {
            let o = cmd_evaluate(&input, &pipeline.config()?, folds, &out)?;
            let r = &o.evaluation.report;
            println!(
                "pooled accuracy: {} ({}/{})",
                percent(r.accuracy),
                r.correct,
                r.total
            );
            println!("{}", o.report_path.display());
            println!("{}", o.csv_path.display());
        }
        Command::Decode {
            fixtures,
            objectness_threshold,
            out,
        } => {
            let doc = cmd_decode(&fixtures, objectness_threshold, &out)?;
            for img in &doc.images {
                println!("{}\t{} detection(s)", img.image, img.detections.len());
            }
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Internal => 3,
            })
        }
    }
}
