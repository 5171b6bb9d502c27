//! Stratified holdout and stratified k-fold assignment.
//!
//! Both plans are pure functions of the per-class id sets, the fraction or
//! fold count, and the seed. Within each class the ids are sorted, shuffled
//! with a stream keyed by `(seed, class name)`, and then cut (holdout) or
//! dealt round-robin (k-fold). The round-robin offset carries over from one
//! class to the next so total fold sizes also stay within one of each other.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Manifest;
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Trainval,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_fraction: f64,
    pub seed: u64,
    pub assignment: BTreeMap<String, Subset>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub fold_of: BTreeMap<String, usize>,
}

/// `clamp(round_half_up(n * fraction), 1, n - 1)` for `n >= 2`.
pub fn holdout_count(n: usize, fraction: f64) -> usize {
    let raw = (n as f64 * fraction + 0.5).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

pub fn stratified_holdout(m: &Manifest, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut assignment = BTreeMap::new();
    for (class, mut ids) in m.ids_by_class() {
        let n = ids.len();
        if n < 2 {
            return Err(Error::ClassTooSmall {
                class,
                size: n,
                required: 2,
            });
        }
        Stream::derive(seed, "holdout", &[class.as_bytes()]).shuffle(&mut ids);
        let n_test = holdout_count(n, test_fraction);
        for (i, id) in ids.into_iter().enumerate() {
            let subset = if i < n_test {
                Subset::Test
            } else {
                Subset::Trainval
            };
            assignment.insert(id, subset);
        }
    }
    Ok(SplitPlan {
        test_fraction,
        seed,
        assignment,
    })
}

/// `m` is expected to be already restricted to the train/validation subset
/// (see [`SplitPlan::restrict`]).
pub fn stratified_kfold(m: &Manifest, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut fold_of = BTreeMap::new();
    let mut offset = 0usize;
    for (class, mut ids) in m.ids_by_class() {
        let n = ids.len();
        if n < k {
            return Err(Error::ClassTooSmall {
                class,
                size: n,
                required: k,
            });
        }
        Stream::derive(seed, "kfold", &[class.as_bytes()]).shuffle(&mut ids);
        for (i, id) in ids.into_iter().enumerate() {
            fold_of.insert(id, (offset + i) % k);
        }
        offset = (offset + n) % k;
    }
    Ok(FoldPlan { k, seed, fold_of })
}

impl SplitPlan {
    pub fn subset_of(&self, id: &str) -> Option<Subset> {
        self.assignment.get(id).copied()
    }

    pub fn restrict(&self, m: &Manifest, subset: Subset) -> Manifest {
        m.filtered(|r| self.subset_of(&r.id) == Some(subset))
    }

    pub fn count(&self, subset: Subset) -> usize {
        self.assignment.values().filter(|&&s| s == subset).count()
    }
}

impl FoldPlan {
    pub fn fold_size(&self, fold: usize) -> usize {
        self.fold_of.values().filter(|&&f| f == fold).count()
    }

    /// (training ids, validation ids) for one rotation, each sorted.
    pub fn rotation(&self, fold: usize) -> (Vec<String>, Vec<String>) {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (id, &f) in &self.fold_of {
            if f == fold {
                val.push(id.clone());
            } else {
                train.push(id.clone());
            }
        }
        (train, val)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    /// Manifest id with no holdout assignment.
    Unassigned(String),
    /// Plan mentions an id that is not in the manifest.
    UnknownId(String),
    /// Train/validation id missing from the fold plan.
    MissingFromFolds(String),
    /// Test id that also appears in a fold.
    Leakage {
        id: String,
        fold: usize,
    },
    FoldOutOfRange {
        id: String,
        fold: usize,
    },
    /// Per-class fold sizes differ by more than one.
    Stratification {
        class: String,
        min: usize,
        max: usize,
    },
    /// Per-class test count differs from the rounding rule.
    HoldoutCount {
        class: String,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionViolation::Unassigned(id) => write!(f, "unassigned: {id}"),
            PartitionViolation::UnknownId(id) => write!(f, "unknown id: {id}"),
            PartitionViolation::MissingFromFolds(id) => write!(f, "missing from folds: {id}"),
            PartitionViolation::Leakage { id, fold } => {
                write!(f, "leakage: test id {id} in fold {fold}")
            }
            PartitionViolation::FoldOutOfRange { id, fold } => {
                write!(f, "fold out of range: {id} -> {fold}")
            }
            PartitionViolation::Stratification { class, min, max } => {
                write!(
                    f,
                    "stratification: class {class} fold sizes range {min}..{max}"
                )
            }
            PartitionViolation::HoldoutCount {
                class,
                expected,
                got,
            } => {
                write!(
                    f,
                    "holdout count: class {class} expected {expected} test records, got {got}"
                )
            }
        }
    }
}

pub fn verify_partition(
    m: &Manifest,
    split: &SplitPlan,
    folds: &FoldPlan,
) -> Vec<PartitionViolation> {
    let mut out = Vec::new();
    let label_of: HashMap<&str, &str> = m
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.label.as_str()))
        .collect();
    let ids: HashSet<&str> = label_of.keys().copied().collect();

    for r in &m.records {
        if !split.assignment.contains_key(&r.id) {
            out.push(PartitionViolation::Unassigned(r.id.clone()));
        }
    }
    for id in split.assignment.keys() {
        if !ids.contains(id.as_str()) {
            out.push(PartitionViolation::UnknownId(id.clone()));
        }
    }
    for (id, &fold) in &folds.fold_of {
        if !ids.contains(id.as_str()) {
            out.push(PartitionViolation::UnknownId(id.clone()));
        }
        if fold >= folds.k {
            out.push(PartitionViolation::FoldOutOfRange {
                id: id.clone(),
                fold,
            });
        }
        if split.subset_of(id) == Some(Subset::Test) {
            out.push(PartitionViolation::Leakage {
                id: id.clone(),
                fold,
            });
        }
    }
    for (id, &subset) in &split.assignment {
        if subset == Subset::Trainval && !folds.fold_of.contains_key(id) {
            out.push(PartitionViolation::MissingFromFolds(id.clone()));
        }
    }

    let mut per_class_test: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_class_total: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &m.records {
        *per_class_total.entry(r.label.as_str()).or_default() += 1;
        if split.subset_of(&r.id) == Some(Subset::Test) {
            *per_class_test.entry(r.label.as_str()).or_default() += 1;
        }
    }
    for class in &m.classes {
        let n = per_class_total.get(class.as_str()).copied().unwrap_or(0);
        if n >= 2 {
            let expected = holdout_count(n, split.test_fraction);
            let got = per_class_test.get(class.as_str()).copied().unwrap_or(0);
            if expected != got {
                out.push(PartitionViolation::HoldoutCount {
                    class: class.clone(),
                    expected,
                    got,
                });
            }
        }
    }

    if folds.k > 0 {
        let mut sizes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (id, &fold) in &folds.fold_of {
            if let (Some(label), true) = (label_of.get(id.as_str()), fold < folds.k) {
                sizes.entry(label).or_insert_with(|| vec![0; folds.k])[fold] += 1;
            }
        }
        for class in &m.classes {
            if let Some(counts) = sizes.get(class.as_str()) {
                let min = *counts.iter().min().unwrap();
                let max = *counts.iter().max().unwrap();
                if max - min > 1 {
                    out.push(PartitionViolation::Stratification {
                        class: class.clone(),
                        min,
                        max,
                    });
                }
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SplitHeader {
    test_fraction: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SplitLine {
    id: String,
    subset: Subset,
}

#[derive(Serialize, Deserialize)]
struct FoldHeader {
    k: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct FoldLine {
    id: String,
    fold: usize,
}

fn write_lines<W: Write, H: Serialize, L: Serialize>(
    mut w: W,
    header: &H,
    lines: impl Iterator<Item = L>,
) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(|e| Error::io("<plan>", e))?;
    for line in lines {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io("<plan>", e))?;
    }
    Ok(())
}

fn read_lines<R: BufRead, H: for<'de> Deserialize<'de>, L: for<'de> Deserialize<'de>>(
    r: R,
    what: &'static str,
) -> Result<(H, Vec<L>)> {
    let mut header = None;
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<plan>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(
                serde_json::from_str(&line)
                    .map_err(|e| Error::parse(what, i + 1, e.to_string()))?,
            );
        } else {
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::parse(what, i + 1, e.to_string()))?,
            );
        }
    }
    let header = header.ok_or_else(|| Error::parse(what, 1, "missing header line"))?;
    Ok((header, out))
}

fn save_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

impl SplitPlan {
    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        write_lines(
            w,
            &SplitHeader {
                test_fraction: self.test_fraction,
                seed: self.seed,
            },
            self.assignment.iter().map(|(id, &subset)| SplitLine {
                id: id.clone(),
                subset,
            }),
        )
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<SplitPlan> {
        let (h, lines): (SplitHeader, Vec<SplitLine>) = read_lines(r, "split plan")?;
        Ok(SplitPlan {
            test_fraction: h.test_fraction,
            seed: h.seed,
            assignment: lines.into_iter().map(|l| (l.id, l.subset)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_with(path, |w| self.write_jsonl(w))
    }

    pub fn load(path: &Path) -> Result<SplitPlan> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SplitPlan::read_jsonl(BufReader::new(f))
    }
}

impl FoldPlan {
    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        write_lines(
            w,
            &FoldHeader {
                k: self.k,
                seed: self.seed,
            },
            self.fold_of.iter().map(|(id, &fold)| FoldLine {
                id: id.clone(),
                fold,
            }),
        )
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<FoldPlan> {
        let (h, lines): (FoldHeader, Vec<FoldLine>) = read_lines(r, "fold plan")?;
        Ok(FoldPlan {
            k: h.k,
            seed: h.seed,
            fold_of: lines.into_iter().map(|l| (l.id, l.fold)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_with(path, |w| self.write_jsonl(w))
    }

    pub fn load(path: &Path) -> Result<FoldPlan> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FoldPlan::read_jsonl(BufReader::new(f))
    }
}

/// Per-class count table: class, total, trainval, test, then one column per fold.
pub fn count_table(m: &Manifest, split: &SplitPlan, folds: Option<&FoldPlan>) -> String {
    let k = folds.map_or(0, |f| f.k);
    let mut header = vec![
        "class".to_string(),
        "total".into(),
        "trainval".into(),
        "test".into(),
    ];
    header.extend((0..k).map(|i| format!("fold{i}")));
    let mut rows = vec![header];
    for (class, ids) in m.ids_by_class() {
        let test = ids
            .iter()
            .filter(|id| split.subset_of(id) == Some(Subset::Test))
            .count();
        let mut row = vec![
            class,
            ids.len().to_string(),
            (ids.len() - test).to_string(),
            test.to_string(),
        ];
        if let Some(folds) = folds {
            let mut per_fold = vec![0usize; k];
            for id in &ids {
                if let Some(&f) = folds.fold_of.get(id) {
                    if f < k {
                        per_fold[f] += 1;
                    }
                }
            }
            row.extend(per_fold.iter().map(|c| c.to_string()));
        }
        rows.push(row);
    }
    crate::report::align_columns(&rows)
}
