//! Corpus ingestion into a line-delimited JSON manifest.
//!
//! A corpus is a directory tree where each mapped top-level directory holds
//! the images of one class. Files may sit directly in the class directory or
//! one level deeper; in the latter case the subdirectory name becomes the
//! record's `source` tag (e.g. the atlas an image came from).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::dedup::PerceptualHash;
use crate::error::{Error, Result};

pub const MIN_WIDTH: u32 = 9;
pub const MIN_HEIGHT: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    /// Relative to the manifest's corpus root, `/`-separated.
    pub path: String,
    pub label: String,
    pub source: String,
    pub width: u32,
    pub height: u32,
    pub hash: Option<PerceptualHash>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub classes: Vec<String>,
    pub created: String,
    pub corpus_root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub classes: Vec<String>,
    pub records: Vec<ImageRecord>,
    pub created: String,
    pub corpus_root: PathBuf,
}

/// One directory of the corpus and the class its images carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDir {
    pub dir: String,
    pub class: String,
}

/// Ordered directory → class mapping. Class order is the order in which
/// classes first appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassMap(pub Vec<ClassDir>);

impl ClassMap {
    /// Each class read from a directory of the same name.
    pub fn identity<S: AsRef<str>>(classes: &[S]) -> Self {
        ClassMap(
            classes
                .iter()
                .map(|c| ClassDir {
                    dir: c.as_ref().to_owned(),
                    class: c.as_ref().to_owned(),
                })
                .collect(),
        )
    }

    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for entry in &self.0 {
            if !out.contains(&entry.class) {
                out.push(entry.class.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub manifest: Manifest,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyClassList,
    DuplicateClass(String),
    DuplicateId(String),
    UnknownLabel { id: String, label: String },
    Undersized { id: String, width: u32, height: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyClassList => write!(f, "empty class list"),
            Violation::DuplicateClass(c) => write!(f, "duplicate class: {c}"),
            Violation::DuplicateId(id) => write!(f, "duplicate id: {id}"),
            Violation::UnknownLabel { id, label } => {
                write!(f, "unknown label: {label} (record {id})")
            }
            Violation::Undersized { id, width, height } => {
                write!(f, "undersized image: {width}x{height} (record {id})")
            }
        }
    }
}

pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Current UTC time, or `SOURCE_DATE_EPOCH` when set for reproducible builds.
fn now_rfc3339() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

enum Probe {
    Ok(ImageRecord),
    Skip(SkippedFile),
}

fn probe_file(root: &Path, rel: &str, class: &str, source: &str) -> Result<Probe> {
    let full = root.join(rel);
    let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
    let img = match image::load_from_memory(&bytes) {
        Ok(img) => img,
        Err(e) => {
            return Ok(Probe::Skip(SkippedFile {
                path: rel.to_owned(),
                reason: format!("undecodable: {e}"),
            }))
        }
    };
    let (width, height) = (img.width(), img.height());
    if width < MIN_WIDTH || height < MIN_HEIGHT {
        return Ok(Probe::Skip(SkippedFile {
            path: rel.to_owned(),
            reason: format!("undersized: {width}x{height}"),
        }));
    }
    Ok(Probe::Ok(ImageRecord {
        id: content_id(&bytes),
        path: rel.to_owned(),
        label: class.to_owned(),
        source: source.to_owned(),
        width,
        height,
        hash: None,
    }))
}

fn rel_string(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Scan `root` according to `class_map`. Records come out sorted by relative
/// path regardless of directory enumeration order or thread count.
pub fn scan_dataset(root: &Path, class_map: &ClassMap) -> Result<ScanOutcome> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let classes = class_map.classes();
    if classes.is_empty() {
        return Err(Error::Config("class map is empty".into()));
    }

    // (relative path, class, source)
    let mut candidates: Vec<(String, String, String)> = Vec::new();
    for entry in &class_map.0 {
        let dir = root.join(&entry.dir);
        if !dir.is_dir() {
            continue;
        }
        for item in WalkDir::new(&dir).min_depth(1).max_depth(2) {
            let item = item.map_err(|e| {
                let path = e
                    .path()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| dir.clone());
                Error::io(path, e.into())
            })?;
            if !item.file_type().is_file() {
                continue;
            }
            let rel = item
                .path()
                .strip_prefix(root)
                .expect("walk stays under root");
            let source = if item.depth() == 2 {
                item.path()
                    .parent()
                    .and_then(Path::file_name)
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| entry.dir.clone())
            } else {
                entry.dir.clone()
            };
            candidates.push((rel_string(rel), entry.class.clone(), source));
        }
    }
    candidates.sort();
    candidates.dedup_by(|a, b| a.0 == b.0);

    let probes: Vec<Result<Probe>> = candidates
        .par_iter()
        .map(|(rel, class, source)| probe_file(root, rel, class, source))
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for probe in probes {
        match probe? {
            Probe::Ok(r) => records.push(r),
            Probe::Skip(s) => skipped.push(s),
        }
    }

    for class in &classes {
        if !records.iter().any(|r| &r.label == class) {
            return Err(Error::EmptyClass(class.clone()));
        }
    }

    Ok(ScanOutcome {
        manifest: Manifest {
            classes,
            records,
            created: now_rfc3339(),
            corpus_root: root.to_path_buf(),
        },
        skipped,
    })
}

pub fn validate_manifest(m: &Manifest) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.classes.is_empty() {
        out.push(Violation::EmptyClassList);
    }
    let mut seen_classes = HashSet::new();
    for c in &m.classes {
        if !seen_classes.insert(c.as_str()) {
            out.push(Violation::DuplicateClass(c.clone()));
        }
    }
    let mut seen_ids = HashSet::new();
    let mut reported = HashSet::new();
    for r in &m.records {
        if !seen_ids.insert(r.id.as_str()) && reported.insert(r.id.as_str()) {
            out.push(Violation::DuplicateId(r.id.clone()));
        }
        if !seen_classes.contains(r.label.as_str()) {
            out.push(Violation::UnknownLabel {
                id: r.id.clone(),
                label: r.label.clone(),
            });
        }
        if r.width < MIN_WIDTH || r.height < MIN_HEIGHT {
            out.push(Violation::Undersized {
                id: r.id.clone(),
                width: r.width,
                height: r.height,
            });
        }
    }
    out
}

impl Manifest {
    pub fn header(&self) -> ManifestHeader {
        ManifestHeader {
            classes: self.classes.clone(),
            created: self.created.clone(),
            corpus_root: self.corpus_root.clone(),
        }
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn image_path(&self, record: &ImageRecord) -> PathBuf {
        self.corpus_root.join(&record.path)
    }

    /// Record ids grouped per class, in class order; ids within a class are
    /// sorted so the grouping depends only on the id set.
    pub fn ids_by_class(&self) -> Vec<(String, Vec<String>)> {
        let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry(r.label.as_str())
                .or_default()
                .push(r.id.clone());
        }
        self.classes
            .iter()
            .map(|c| {
                let mut ids = groups.remove(c.as_str()).unwrap_or_default();
                ids.sort();
                (c.clone(), ids)
            })
            .collect()
    }

    /// Copy with only the records whose id satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(&ImageRecord) -> bool) -> Manifest {
        Manifest {
            classes: self.classes.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            created: self.created.clone(),
            corpus_root: self.corpus_root.clone(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Manifest> {
        let mut lines = r.lines().enumerate();
        let header: ManifestHeader = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io("<manifest>", e))?;
                serde_json::from_str(&line)
                    .map_err(|e| Error::parse("manifest", 1, e.to_string()))?
            }
            None => return Err(Error::parse("manifest", 1, "missing header line")),
        };
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io("<manifest>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ImageRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse("manifest", i + 1, e.to_string()))?;
            records.push(rec);
        }
        Ok(Manifest {
            classes: header.classes,
            records,
            created: header.created,
            corpus_root: header.corpus_root,
        })
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Manifest::read_jsonl(BufReader::new(f))
    }
}
