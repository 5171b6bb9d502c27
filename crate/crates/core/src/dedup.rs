//! dHash perceptual hashing and greedy duplicate removal.
//!
//! Hash definition, fixed as the wire format:
//! 1. convert to luma with weights 0.299 / 0.587 / 0.114 (no rounding);
//! 2. bilinear resample to 9 columns x 8 rows with pixel-center alignment
//!    (see [`crate::raster`]);
//! 3. for each row, left to right, emit 1 where `p(x, y) > p(x + 1, y)`;
//! 4. bits are packed row-major, the top-left comparison in the most
//!    significant bit.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::catalog::Manifest;
use crate::error::{Error, Result};
use crate::raster::Raster;

const HASH_COLS: usize = 9;
const HASH_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PerceptualHash(pub u64);

impl PerceptualHash {
    pub fn distance(self, other: PerceptualHash) -> u32 {
        hamming_distance(self, other)
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 16 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().map(PerceptualHash)
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for PerceptualHash {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PerceptualHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PerceptualHash::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("expected 16 hex digits, got {s:?}")))
    }
}

pub fn hamming_distance(a: PerceptualHash, b: PerceptualHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// dHash of an arbitrary raster (1 channel, or RGB in the first three).
pub fn dhash_raster(img: &Raster) -> PerceptualHash {
    let small = img.luma().resize_bilinear(HASH_COLS, HASH_ROWS);
    let mut bits = 0u64;
    for y in 0..HASH_ROWS {
        for x in 0..HASH_COLS - 1 {
            bits <<= 1;
            if small.get(x, y, 0) > small.get(x + 1, y, 0) {
                bits |= 1;
            }
        }
    }
    PerceptualHash(bits)
}

pub fn compute_dhash(img: &DynamicImage) -> PerceptualHash {
    let (raster, _) = Raster::from_image(img);
    dhash_raster(&raster)
}

pub fn hash_file(path: &Path) -> Result<PerceptualHash> {
    let img = image::open(path).map_err(|e| Error::BadImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(compute_dhash(&img))
}

/// Fill in every missing `hash` of `m`, decoding images in parallel.
pub fn hash_manifest(m: &mut Manifest) -> Result<()> {
    let root = m.corpus_root.clone();
    let hashes: Vec<Result<Option<PerceptualHash>>> = m
        .records
        .par_iter()
        .map(|r| match r.hash {
            Some(_) => Ok(None),
            None => hash_file(&root.join(&r.path)).map(Some),
        })
        .collect();
    for (r, h) in m.records.iter_mut().zip(hashes) {
        if let Some(h) = h? {
            r.hash = Some(h);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RemovedPair {
    pub duplicate: String,
    pub retained: String,
    pub distance: u32,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub kept: Manifest,
    pub removed: Vec<RemovedPair>,
}

/// Greedy first-wins dedup in manifest order. Records without a hash are
/// hashed from disk first.
pub fn deduplicate(m: &Manifest, threshold: u32) -> Result<DedupOutcome> {
    let mut hashed = m.clone();
    hash_manifest(&mut hashed)?;

    let mut kept_records = Vec::with_capacity(hashed.records.len());
    let mut kept_hashes: Vec<(PerceptualHash, usize)> = Vec::new();
    let mut exact: HashMap<PerceptualHash, usize> = HashMap::new();
    let mut removed = Vec::new();

    for (pos, record) in hashed.records.iter().enumerate() {
        let h = record.hash.expect("hashed above");
        let hit = if threshold == 0 {
            exact.get(&h).map(|&i| (i, 0))
        } else {
            kept_hashes
                .iter()
                .map(|&(kh, i)| (i, hamming_distance(kh, h)))
                .find(|&(_, d)| d <= threshold)
        };
        match hit {
            Some((i, distance)) => removed.push(RemovedPair {
                duplicate: record.id.clone(),
                retained: hashed.records[i].id.clone(),
                distance,
            }),
            None => {
                exact.entry(h).or_insert(pos);
                kept_hashes.push((h, pos));
                kept_records.push(record.clone());
            }
        }
    }

    let kept = Manifest {
        records: kept_records,
        ..hashed
    };
    Ok(DedupOutcome { kept, removed })
}

/// Tab-separated `duplicate_id<TAB>retained_id` lines.
pub fn write_removed<W: Write>(removed: &[RemovedPair], mut w: W) -> std::io::Result<()> {
    for pair in removed {
        writeln!(w, "{}\t{}", pair.duplicate, pair.retained)?;
    }
    Ok(())
}
