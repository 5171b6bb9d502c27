//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use lesionkit::catalog::{ClassMap, ImageRecord, Manifest};
use lesionkit::config::RunConfig;
use lesionkit::partition::{FoldPlan, SplitPlan, Subset};
use lesionkit::refmodel::{loss_and_grad, LinearHead};
use lesionkit::rng::Stream;
use lesionkit::synth::CLASSES;
use lesionkit::tables::FeatureRow;
use lesionkit::trainctl::{Checkpoint, Evaluation, Trainer};
use lesionkit::Result;

/// Straight-line dHash over an RGB8 buffer: float luma, 9x8 bilinear with
/// pixel-center alignment, bit set where left > right, MSB first.
pub fn dhash_oracle(rgb: &[u8], width: usize, height: usize) -> u64 {
    let luma: Vec<f64> = rgb
        .chunks(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    let at = |x: usize, y: usize| luma[y * width + x];
    let coord = |dst: usize, dst_len: usize, src_len: usize| -> f64 {
        let v = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
        v.max(0.0).min((src_len - 1) as f64)
    };
    let mut small = [[0.0f64; 9]; 8];
    for (row, out_row) in small.iter_mut().enumerate() {
        let sy = coord(row, 8, height);
        for (col, cell) in out_row.iter_mut().enumerate() {
            let sx = coord(col, 9, width);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * fx;
            let bottom = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * fx;
            *cell = top + (bottom - top) * fy;
        }
    }
    let mut bits = 0u64;
    for row in &small {
        for col in 0..8 {
            bits = (bits << 1) | u64::from(row[col] > row[col + 1]);
        }
    }
    bits
}

/// 16x16, left half white, right half black.
pub fn two_tone() -> (Vec<u8>, usize, usize) {
    let (w, h) = (16, 16);
    let mut buf = Vec::with_capacity(w * h * 3);
    for _y in 0..h {
        for x in 0..w {
            let v = if x < w / 2 { 255 } else { 0 };
            buf.extend_from_slice(&[v, v, v]);
        }
    }
    (buf, w, h)
}

pub const TWO_TONE_HASH: u64 = 0x1818_1818_1818_1818;

/// Per-class and averaged metrics recounted from raw (truth, predicted) pairs.
#[derive(Debug)]
pub struct OracleMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub accuracy_std: f64,
    pub accuracy_eq1: f64,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub weighted_p: f64,
    pub weighted_r: f64,
    pub weighted_f1: f64,
}

pub fn metrics_oracle(pairs: &[(usize, usize)], n: usize) -> OracleMetrics {
    let total = pairs.len() as f64;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let (mut precision, mut recall, mut f1, mut support) = (vec![], vec![], vec![], vec![]);
    let mut correct = 0u64;
    let mut eq1 = 0.0;
    for c in 0..n {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        let tn = pairs.iter().filter(|&&(t, p)| t != c && p != c).count() as f64;
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        precision.push(p);
        recall.push(r);
        f1.push(div(2.0 * p * r, p + r));
        support.push((tp + fn_) as u64);
        eq1 += (tp + tn) / total;
        correct += tp as u64;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let weigh = |v: &[f64]| {
        v.iter()
            .zip(&support)
            .map(|(m, &s)| m * s as f64 / total)
            .sum::<f64>()
    };
    OracleMetrics {
        accuracy_std: correct as f64 / total,
        accuracy_eq1: eq1 / n as f64,
        macro_p: mean(&precision),
        macro_r: mean(&recall),
        macro_f1: mean(&f1),
        weighted_p: weigh(&precision),
        weighted_r: weigh(&recall),
        weighted_f1: weigh(&f1),
        precision,
        recall,
        f1,
        support,
    }
}

pub fn record(id: &str, label: &str) -> ImageRecord {
    ImageRecord {
        id: id.to_owned(),
        path: format!("{label}/{id}.png"),
        label: label.to_owned(),
        source: label.to_owned(),
        width: 32,
        height: 32,
        hash: None,
    }
}

/// Manifest with `sizes[c]` records for class `c{c}`, ids unique across classes.
pub fn manifest_with(sizes: &[usize]) -> Manifest {
    let classes: Vec<String> = (0..sizes.len()).map(|c| format!("c{c}")).collect();
    let mut records = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            records.push(record(&format!("{c}-{i:04}"), &classes[c]));
        }
    }
    Manifest {
        classes,
        records,
        created: "1970-01-01T00:00:00Z".into(),
        corpus_root: PathBuf::from("mem"),
    }
}

/// Independent check of a holdout + k-fold partition. Returns the first
/// broken property.
pub fn check_partition(
    m: &Manifest,
    split: &SplitPlan,
    folds: &FoldPlan,
    fraction: f64,
) -> Result<(), String> {
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &m.records {
        by_class.entry(&r.label).or_default().push(&r.id);
    }
    if split.assignment.len() != m.records.len() {
        return Err(format!(
            "holdout covers {} of {} ids",
            split.assignment.len(),
            m.records.len()
        ));
    }
    let mut fold_counts: HashMap<(&str, usize), usize> = HashMap::new();
    for (class, ids) in &by_class {
        let n = ids.len();
        let expected = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        let mut test = 0;
        for id in ids {
            match (split.assignment.get(*id), folds.fold_of.get(*id)) {
                (Some(Subset::Test), None) => test += 1,
                (Some(Subset::Test), Some(f)) => {
                    return Err(format!("test id {id} leaks into fold {f}"))
                }
                (Some(Subset::Trainval), Some(&f)) if f < folds.k => {
                    *fold_counts.entry((class, f)).or_default() += 1;
                }
                (Some(Subset::Trainval), other) => {
                    return Err(format!("trainval id {id} has fold {other:?}"))
                }
                (None, _) => return Err(format!("id {id} unassigned")),
            }
        }
        if test != expected {
            return Err(format!(
                "class {class}: {test} test ids, rounding rule gives {expected}"
            ));
        }
        let sizes: Vec<usize> = (0..folds.k)
            .map(|f| fold_counts.get(&(*class, f)).copied().unwrap_or(0))
            .collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("class {class}: fold sizes {sizes:?}"));
        }
    }
    let trainval = split
        .assignment
        .values()
        .filter(|&&s| s == Subset::Trainval)
        .count();
    if folds.fold_of.len() != trainval {
        return Err(format!(
            "fold plan has {} ids, trainval has {trainval}",
            folds.fold_of.len()
        ));
    }
    Ok(())
}

/// Run configuration for a synthetic corpus written by `synth::generate_corpus`.
pub fn synth_config(corpus: &Path, classes: usize) -> RunConfig {
    RunConfig {
        corpus_root: corpus.to_path_buf(),
        class_map: ClassMap::identity(&CLASSES[..classes]),
        ..RunConfig::default()
    }
}

pub fn gauss(s: &mut Stream) -> f64 {
    let u1 = 1.0 - s.unit_f64();
    let u2 = s.unit_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{i}")).collect()
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all
/// parameters, with central differences of step `h`.
pub fn max_relative_error(head: &LinearHead, rows: &[FeatureRow], h: f64) -> f64 {
    let batch: Vec<&FeatureRow> = rows.iter().collect();
    let (_, analytic) = loss_and_grad(head, &batch).unwrap();
    let base = head.params();
    let mut probe = head.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let (plus, _) = loss_and_grad(&probe, &batch).unwrap();
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let (minus, _) = loss_and_grad(&probe, &batch).unwrap();
        let numeric = (plus - minus) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

pub fn random_instance(s: &mut Stream) -> (LinearHead, Vec<FeatureRow>) {
    let classes = 2 + s.below(4) as usize;
    let dim = 1 + s.below(6) as usize;
    let mut head = LinearHead::zeros(classes, dim);
    let params: Vec<f64> = (0..head.param_count()).map(|_| gauss(s) * 0.7).collect();
    head.set_params(&params).unwrap();
    let rows = (0..1 + s.below(8))
        .map(|i| FeatureRow {
            id: format!("r{i}"),
            label: s.below(classes as u64) as usize,
            features: (0..dim).map(|_| gauss(s)).collect(),
        })
        .collect();
    (head, rows)
}

/// Replays a fixed (val_loss, val_acc) sequence; its single parameter is the
/// index of the last epoch trained.
pub struct Scripted {
    pub script: Vec<(f64, f64)>,
    pub epoch: usize,
    pub lrs: Vec<f64>,
    pub restored: Option<f64>,
}

impl Scripted {
    pub fn new(script: &[(f64, f64)]) -> Self {
        Scripted {
            script: script.to_vec(),
            epoch: 0,
            lrs: Vec::new(),
            restored: None,
        }
    }
}

impl Trainer for Scripted {
    fn train_one_epoch(&mut self, epoch: usize, lr: f64, _batch: usize) -> Result<f64> {
        self.epoch = epoch;
        self.lrs.push(lr);
        Ok(1.0 / epoch as f64)
    }

    fn evaluate(&mut self) -> Result<Evaluation> {
        let (loss, accuracy) = self.script[self.epoch - 1];
        Ok(Evaluation { loss, accuracy })
    }

    fn snapshot(&self) -> Checkpoint {
        Checkpoint {
            classes: vec!["a".into()],
            params: vec![self.epoch as f64],
        }
    }

    fn restore(&mut self, c: &Checkpoint) -> Result<()> {
        self.restored = Some(c.params[0]);
        Ok(())
    }
}
