//! Stage orchestration shared by the CLI subcommands.
//!
//! Output layout under the run directory:
//! ```text
//! config.json                 frozen copy of the run configuration
//! manifest.jsonl              scanned corpus
//! skipped.jsonl               undecodable / undersized files
//! manifest.dedup.jsonl        manifest after duplicate removal
//! removed.tsv                 duplicate_id <TAB> retained_id
//! split.jsonl, folds.jsonl    holdout and k-fold plans
//! <model>/fold{i}.history.jsonl
//! <model>/fold{i}.ckpt
//! <model>/fold{i}.predictions.csv
//! <model>/fold{i}.metrics.json
//! <model>/cv_metrics.json     fold-size-weighted aggregate
//! <model>/test_predictions.csv, <model>/test_metrics.json
//! <model>/result.json         comparison-table row
//! <model>/heatmap.svg, <model>/per_class.txt, <model>/per_class.csv
//! report.txt, report.csv      comparison table over all models run
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog::{scan_dataset, validate_manifest, Manifest};
use crate::config::RunConfig;
use crate::dedup::{deduplicate, write_removed};
use crate::error::{Error, Result};
use crate::extract::{decode_manifest, extract_table, index_by_id, lookup, AugmentedFeatures};
use crate::metrics::{compute_metrics, confusion_from_log, MetricReport};
use crate::partition::{
    count_table, stratified_holdout, stratified_kfold, verify_partition, FoldPlan, SplitPlan,
    Subset,
};
use crate::refmodel::{cross_validate, predict, TrainFeatures};
use crate::report::{
    comparison_csv, comparison_table, heatmap_svg, per_class_csv, per_class_table, ModelResult,
};
use crate::tables::FeatureTable;
use crate::trainctl::CheckpointPolicy;

/// Paths written by a stage, in write order.
#[derive(Debug, Default, Clone)]
pub struct Artifacts(pub Vec<PathBuf>);

impl Artifacts {
    fn push(&mut self, p: PathBuf) -> &Path {
        self.0.push(p);
        self.0.last().unwrap()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn freeze_config(cfg: &RunConfig, out: &Path, artifacts: &mut Artifacts) -> Result<()> {
    let path = out.join("config.json");
    write_text(&path, &cfg.to_json())?;
    artifacts.push(path);
    Ok(())
}

pub fn ingest(cfg: &RunConfig, out: &Path, artifacts: &mut Artifacts) -> Result<Manifest> {
    ensure_dir(out)?;
    let scan = scan_dataset(&cfg.corpus_root, &cfg.class_map)?;
    let violations = validate_manifest(&scan.manifest);
    if let Some(v) = violations
        .iter()
        .find(|v| !matches!(v, crate::catalog::Violation::DuplicateId(_)))
    {
        // duplicate ids are byte-identical files and are resolved by dedup
        return Err(Error::Config(format!("manifest invalid: {v}")));
    }
    let path = out.join("manifest.jsonl");
    scan.manifest.save(&path)?;
    artifacts.push(path);
    let path = out.join("skipped.jsonl");
    let mut text = String::new();
    for s in &scan.skipped {
        text.push_str(&serde_json::to_string(s)?);
        text.push('\n');
    }
    write_text(&path, &text)?;
    artifacts.push(path);
    Ok(scan.manifest)
}

pub fn dedup(
    manifest: &Manifest,
    threshold: u32,
    out: &Path,
    artifacts: &mut Artifacts,
) -> Result<Manifest> {
    let outcome = deduplicate(manifest, threshold)?;
    let path = out.join("manifest.dedup.jsonl");
    outcome.kept.save(&path)?;
    artifacts.push(path);
    let path = out.join("removed.tsv");
    let mut buf = Vec::new();
    write_removed(&outcome.removed, &mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    artifacts.push(path);
    Ok(outcome.kept)
}

pub struct Plans {
    pub split: SplitPlan,
    pub folds: FoldPlan,
    pub table: String,
}

pub fn split(
    cfg: &RunConfig,
    manifest: &Manifest,
    out: &Path,
    artifacts: &mut Artifacts,
) -> Result<Plans> {
    let split = stratified_holdout(manifest, cfg.test_fraction, cfg.seeds.split)?;
    let trainval = split.restrict(manifest, Subset::Trainval);
    let folds = stratified_kfold(&trainval, cfg.k, cfg.seeds.folds)?;
    let violations = verify_partition(manifest, &split, &folds);
    if let Some(v) = violations.first() {
        return Err(Error::Config(format!("partition invalid: {v}")));
    }
    let path = out.join("split.jsonl");
    split.save(&path)?;
    artifacts.push(path);
    let path = out.join("folds.jsonl");
    folds.save(&path)?;
    artifacts.push(path);
    let table = count_table(manifest, &split, Some(&folds));
    Ok(Plans {
        split,
        folds,
        table,
    })
}

fn test_ids(manifest: &Manifest, split: &SplitPlan) -> Vec<String> {
    let mut ids: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| split.subset_of(&r.id) == Some(Subset::Test))
        .map(|r| r.id.clone())
        .collect();
    ids.sort();
    ids
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub result: ModelResult,
    pub test_report: MetricReport,
    pub best_fold: usize,
}

/// Cross-validate the head for `model`, then score the holdout test set with
/// the best fold's head.
pub fn train_model(
    cfg: &RunConfig,
    model: &str,
    manifest: &Manifest,
    plans: (&SplitPlan, &FoldPlan),
    out: &Path,
    artifacts: &mut Artifacts,
) -> Result<TrainOutcome> {
    let (split, folds) = plans;
    let spec = cfg.model_spec(model)?.clone();
    let head_cfg = cfg.head_config();
    let model_dir = out.join(model);
    ensure_dir(&model_dir)?;
    let ckpt_dir = model_dir.clone();
    let checkpoints =
        |fold: usize| CheckpointPolicy::in_dir(ckpt_dir.clone(), &format!("fold{fold}.ckpt"));
    let tests = test_ids(manifest, split);

    let (cv, test_table) = match cfg.pixel_extractor(model)? {
        Some(extractor) => {
            let trainval = split.restrict(manifest, Subset::Trainval);
            let test_manifest = split.restrict(manifest, Subset::Test);
            let images = decode_manifest(&trainval)?;
            let test_images = decode_manifest(&test_manifest)?;
            let index = index_by_id(&images);
            let cv = cross_validate(
                folds,
                &head_cfg,
                |_, train_ids, val_ids| {
                    let train: Box<dyn TrainFeatures> = Box::new(AugmentedFeatures {
                        images: lookup(&index, train_ids)?,
                        extractor: &extractor,
                        master_seed: cfg.seeds.augment,
                    });
                    let val =
                        extract_table(&lookup(&index, val_ids)?, &extractor, &manifest.classes)?;
                    Ok((train, val))
                },
                checkpoints,
            )?;
            let test_index = index_by_id(&test_images);
            let test_table =
                extract_table(&lookup(&test_index, &tests)?, &extractor, &manifest.classes)?;
            (cv, test_table)
        }
        None => {
            let path = spec
                .features
                .as_ref()
                .expect("registry entry without grid has features");
            let table = FeatureTable::load(path)?;
            if table.dim != spec.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: spec.feature_dim,
                    got: table.dim,
                });
            }
            if table.classes != manifest.classes {
                return Err(Error::Config(format!(
                    "feature table classes {:?} differ from manifest",
                    table.classes
                )));
            }
            let cv = cross_validate(
                folds,
                &head_cfg,
                |_, train_ids, val_ids| {
                    let train: Box<dyn TrainFeatures> = Box::new(table.select(train_ids)?);
                    Ok((train, table.select(val_ids)?))
                },
                checkpoints,
            )?;
            let test_table = table.select(&tests)?;
            (cv, test_table)
        }
    };

    for f in &cv.folds {
        artifacts.push(model_dir.join(format!("fold{}.ckpt", f.fold)));
        let path = model_dir.join(format!("fold{}.history.jsonl", f.fold));
        let mut buf = Vec::new();
        f.history.write_jsonl(&mut buf)?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        artifacts.push(path);
        let path = model_dir.join(format!("fold{}.predictions.csv", f.fold));
        f.predictions.save(&path)?;
        artifacts.push(path);
        let path = model_dir.join(format!("fold{}.metrics.json", f.fold));
        write_json(&path, &f.report)?;
        artifacts.push(path);
    }
    let path = model_dir.join("cv_metrics.json");
    write_json(&path, &cv.aggregate)?;
    artifacts.push(path);

    let best = cv.best_fold();
    let test_log = predict(&best.head, &test_table)?;
    let path = model_dir.join("test_predictions.csv");
    test_log.save(&path)?;
    artifacts.push(path);
    let test_report = compute_metrics(&confusion_from_log(&test_log, &manifest.classes)?)?;
    let path = model_dir.join("test_metrics.json");
    write_json(&path, &test_report)?;
    artifacts.push(path);

    let result = ModelResult {
        model: model.to_owned(),
        parameters: spec.parameters,
        report: cv.aggregate.clone(),
    };
    let path = model_dir.join("result.json");
    write_json(&path, &result)?;
    artifacts.push(path);

    let path = model_dir.join("heatmap.svg");
    write_text(
        &path,
        &heatmap_svg(
            &format!("{model} (test set)"),
            &test_report.classes,
            &test_report.normalized,
        ),
    )?;
    artifacts.push(path);
    let path = model_dir.join("per_class.txt");
    write_text(&path, &per_class_table(&test_report))?;
    artifacts.push(path);
    let path = model_dir.join("per_class.csv");
    write_text(&path, &per_class_csv(&test_report))?;
    artifacts.push(path);

    Ok(TrainOutcome {
        result,
        test_report,
        best_fold: best.fold,
    })
}

pub fn report(results: &[ModelResult], out: &Path, artifacts: &mut Artifacts) -> Result<String> {
    if results.is_empty() {
        return Err(Error::Empty("model results"));
    }
    let table = comparison_table(results);
    let path = out.join("report.txt");
    write_text(&path, &table)?;
    artifacts.push(path);
    let path = out.join("report.csv");
    write_text(&path, &comparison_csv(results))?;
    artifacts.push(path);
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub scanned: usize,
    pub kept: usize,
    pub test: usize,
    pub trainval: usize,
    pub outcomes: Vec<TrainOutcome>,
    pub table: String,
}

/// Every stage in order for each model in `models`.
pub fn run_pipeline(
    cfg: &RunConfig,
    models: &[String],
    out: &Path,
    artifacts: &mut Artifacts,
) -> Result<PipelineSummary> {
    cfg.validate(true)?;
    for m in models {
        cfg.model_spec(m)?;
    }
    ensure_dir(out)?;
    freeze_config(cfg, out, artifacts)?;
    let scanned = ingest(cfg, out, artifacts)?;
    let kept = dedup(&scanned, cfg.dedup_threshold, out, artifacts)?;
    let plans = split(cfg, &kept, out, artifacts)?;
    let mut outcomes = Vec::new();
    for m in models {
        outcomes.push(train_model(
            cfg,
            m,
            &kept,
            (&plans.split, &plans.folds),
            out,
            artifacts,
        )?);
    }
    let results: Vec<ModelResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let table = report(&results, out, artifacts)?;
    Ok(PipelineSummary {
        scanned: scanned.records.len(),
        kept: kept.records.len(),
        test: plans.split.count(Subset::Test),
        trainval: plans.split.count(Subset::Trainval),
        outcomes,
        table,
    })
}

pub fn print_artifacts<W: Write>(artifacts: &Artifacts, mut w: W) -> std::io::Result<()> {
    for p in &artifacts.0 {
        writeln!(w, "artifact\t{}", p.display())?;
    }
    Ok(())
}
