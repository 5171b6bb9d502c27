use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lesionkit::augment::{apply_raster, materialize, SampleSeed};
use lesionkit::catalog::Manifest;
use lesionkit::config::{RunConfig, Seeds};
use lesionkit::error::{Error, Result};
use lesionkit::extract::decode_manifest;
use lesionkit::metrics::{compute_metrics, confusion_from_log};
use lesionkit::partition::{count_table, FoldPlan, SplitPlan};
use lesionkit::pipeline::{self, print_artifacts, write_json, Artifacts};
use lesionkit::report::{per_class_table, ModelResult};
use lesionkit::synth::{generate_corpus, SynthSpec};
use lesionkit::tables::PredictionLog;

#[derive(Parser)]
#[command(
    name = "lesionkit",
    version,
    about = "Skin-lesion dataset curation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the corpus into manifest.jsonl.
    Ingest(Common),
    /// Remove near-duplicates from a manifest.
    Dedup {
        #[command(flatten)]
        common: Common,
        /// Hamming distance threshold (inclusive).
        #[arg(long)]
        threshold: Option<u32>,
        /// Input manifest (default: <out>/manifest.jsonl).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Stratified holdout and k-fold plans.
    Split {
        #[command(flatten)]
        common: Common,
        /// Input manifest (default: <out>/manifest.dedup.jsonl).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Write augmented training views of a few images as PNGs.
    AugmentPreview {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Number of images.
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Epochs per image.
        #[arg(long, default_value_t = 3)]
        epochs: u64,
    },
    /// Cross-validate the classification head and score the test set.
    TrainHead {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Metrics for a prediction log.
    Evaluate {
        /// PredictionLog CSV.
        #[arg(long)]
        predictions: PathBuf,
        /// Comma-separated class names in index order.
        #[arg(long, value_delimiter = ',', required = true)]
        classes: Vec<String>,
        /// Directory for metrics.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Comparison table from per-model result.json files.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Every stage end to end.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Models to run (repeatable; default: the configured model).
        #[arg(long)]
        model: Vec<String>,
    },
    /// Generate a synthetic five-class corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Unique images per class, comma-separated.
        #[arg(long, value_delimiter = ',', default_values_t = [200usize, 200, 200, 200, 200])]
        per_class: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        duplicates: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seeds = Seeds::all(seed);
    }
    Ok(cfg)
}

fn manifest_or(path: Option<PathBuf>, out: &Path, default: &str) -> Result<Manifest> {
    Manifest::load(&path.unwrap_or_else(|| out.join(default)))
}

fn run(cli: Cli, artifacts: &mut Artifacts) -> Result<()> {
    match cli.command {
        Command::Ingest(common) => {
            let cfg = load_config(&common)?;
            cfg.validate(true)?;
            let m = pipeline::ingest(&cfg, &common.out, artifacts)?;
            eprintln!("ingested {} records", m.records.len());
        }
        Command::Dedup {
            common,
            threshold,
            manifest,
        } => {
            let cfg = load_config(&common)?;
            let m = manifest_or(manifest, &common.out, "manifest.jsonl")?;
            let kept = pipeline::dedup(
                &m,
                threshold.unwrap_or(cfg.dedup_threshold),
                &common.out,
                artifacts,
            )?;
            eprintln!("kept {} of {} records", kept.records.len(), m.records.len());
        }
        Command::Split { common, manifest } => {
            let cfg = load_config(&common)?;
            cfg.validate(false)?;
            let m = manifest_or(manifest, &common.out, "manifest.dedup.jsonl")?;
            let plans = pipeline::split(&cfg, &m, &common.out, artifacts)?;
            eprint!("{}", plans.table);
        }
        Command::AugmentPreview {
            common,
            model,
            manifest,
            count,
            epochs,
        } => {
            let cfg = load_config(&common)?;
            let model = model.unwrap_or_else(|| cfg.model.clone());
            let policy = cfg.policy_for(&model)?;
            policy.validate()?;
            let mut m = manifest_or(manifest, &common.out, "manifest.dedup.jsonl")?;
            m.records.truncate(count);
            let dir = common.out.join("preview");
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            for img in decode_manifest(&m)? {
                for epoch in 0..epochs {
                    let seed = SampleSeed {
                        master_seed: cfg.seeds.augment,
                        record_id: &img.id,
                        epoch,
                    };
                    let t = apply_raster(&img.raster, img.depth, &policy, &seed, true);
                    artifacts.0.push(materialize(&t, &dir, &img.id, epoch)?);
                }
            }
        }
        Command::TrainHead {
            common,
            model,
            manifest,
        } => {
            let cfg = load_config(&common)?;
            cfg.validate(false)?;
            let model = model.unwrap_or_else(|| cfg.model.clone());
            let m = manifest_or(manifest, &common.out, "manifest.dedup.jsonl")?;
            let split = SplitPlan::load(&common.out.join("split.jsonl"))?;
            let folds = FoldPlan::load(&common.out.join("folds.jsonl"))?;
            let outcome =
                pipeline::train_model(&cfg, &model, &m, (&split, &folds), &common.out, artifacts)?;
            eprint!("{}", per_class_table(&outcome.test_report));
        }
        Command::Evaluate {
            predictions,
            classes,
            out,
        } => {
            let log = PredictionLog::load(&predictions, &classes)?;
            let report = compute_metrics(&confusion_from_log(&log, &classes)?)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprint!("{}", per_class_table(&report));
            let path = out.join("metrics.json");
            write_json(&path, &report)?;
            artifacts.0.push(path);
        }
        Command::Report { results, out } => {
            let mut rows = Vec::new();
            for p in &results {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                rows.push(serde_json::from_str::<ModelResult>(&text)?);
            }
            let table = pipeline::report(&rows, &out, artifacts)?;
            eprint!("{table}");
        }
        Command::Pipeline { common, model } => {
            let cfg = load_config(&common)?;
            let models = if model.is_empty() {
                vec![cfg.model.clone()]
            } else {
                model
            };
            let summary = pipeline::run_pipeline(&cfg, &models, &common.out, artifacts)?;
            eprintln!(
                "scanned {}, kept {}, trainval {}, test {}",
                summary.scanned, summary.kept, summary.trainval, summary.test
            );
            if let Ok(m) = Manifest::load(&common.out.join("manifest.dedup.jsonl")) {
                if let (Ok(s), Ok(f)) = (
                    SplitPlan::load(&common.out.join("split.jsonl")),
                    FoldPlan::load(&common.out.join("folds.jsonl")),
                ) {
                    eprint!("{}", count_table(&m, &s, Some(&f)));
                }
            }
            eprint!("{}", summary.table);
        }
        Command::Synth {
            out,
            per_class,
            size,
            duplicates,
            seed,
        } => {
            let summary = generate_corpus(
                &out,
                &SynthSpec {
                    per_class,
                    size,
                    duplicates,
                    seed,
                },
            )?;
            eprintln!(
                "wrote {} files ({} unique, {} duplicates)",
                summary.files, summary.unique, summary.duplicates
            );
            artifacts.0.push(out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut artifacts = Artifacts::default();
    let result = run(cli, &mut artifacts);
    let _ = print_artifacts(&artifacts, std::io::stdout().lock());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
