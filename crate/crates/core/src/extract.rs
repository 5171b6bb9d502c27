//! Built-in cheap feature extractor: the preprocessed tensor downsampled to
//! a small grid and flattened (row-major, channels interleaved).
//!
//! Validation and test features always go through the evaluation path of
//! the augmentation pipeline; only [`AugmentedFeatures`] (the training
//! source) draws random rotations and flips.

use std::borrow::Cow;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_raster, AugmentPolicy, SampleSeed, Size};
use crate::catalog::Manifest;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::refmodel::TrainFeatures;
use crate::tables::{FeatureRow, FeatureTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelExtractor {
    pub policy: AugmentPolicy,
    pub grid: Size,
}

impl PixelExtractor {
    pub fn dim(&self) -> usize {
        self.grid.width as usize * self.grid.height as usize * 3
    }

    pub fn features(
        &self,
        img: &DecodedImage,
        master_seed: u64,
        epoch: u64,
        training: bool,
    ) -> Vec<f64> {
        let seed = SampleSeed {
            master_seed,
            record_id: &img.id,
            epoch,
        };
        let t = apply_raster(&img.raster, img.depth, &self.policy, &seed, training);
        let small = t.resize_bilinear(self.grid.width as usize, self.grid.height as usize);
        if small.channels == 3 {
            small.data
        } else {
            small.data.iter().flat_map(|&v| [v, v, v]).collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodedImage {
    pub id: String,
    pub label: usize,
    pub raster: Raster,
    pub depth: u32,
}

/// Decode every record of `m` (in parallel, output in manifest order).
pub fn decode_manifest(m: &Manifest) -> Result<Vec<DecodedImage>> {
    m.records
        .par_iter()
        .map(|r| {
            let path = m.image_path(r);
            let img = image::open(&path).map_err(|e| Error::BadImage {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let (raster, depth) = Raster::from_image(&img);
            let label = m
                .class_index(&r.label)
                .ok_or_else(|| Error::UnknownLabel(r.label.clone()))?;
            Ok(DecodedImage {
                id: r.id.clone(),
                label,
                raster,
                depth,
            })
        })
        .collect()
}

/// Evaluation-path features (no augmentation) for `images`.
pub fn extract_table(
    images: &[&DecodedImage],
    extractor: &PixelExtractor,
    classes: &[String],
) -> Result<FeatureTable> {
    let rows: Vec<FeatureRow> = images
        .par_iter()
        .map(|img| FeatureRow {
            id: img.id.clone(),
            label: img.label,
            features: extractor.features(img, 0, 0, false),
        })
        .collect();
    let mut table = FeatureTable::new(extractor.dim(), classes.to_vec());
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

/// Training source that re-augments its images every epoch.
pub struct AugmentedFeatures<'a> {
    pub images: Vec<&'a DecodedImage>,
    pub extractor: &'a PixelExtractor,
    pub master_seed: u64,
}

impl TrainFeatures for AugmentedFeatures<'_> {
    fn dim(&self) -> usize {
        self.extractor.dim()
    }

    fn rows_for_epoch(&self, epoch: usize) -> Result<Cow<'_, [FeatureRow]>> {
        let rows = self
            .images
            .par_iter()
            .map(|img| FeatureRow {
                id: img.id.clone(),
                label: img.label,
                features: self
                    .extractor
                    .features(img, self.master_seed, epoch as u64, true),
            })
            .collect();
        Ok(Cow::Owned(rows))
    }
}

/// Index decoded images by id.
pub fn index_by_id(images: &[DecodedImage]) -> HashMap<&str, &DecodedImage> {
    images.iter().map(|i| (i.id.as_str(), i)).collect()
}

pub fn lookup<'a>(
    index: &HashMap<&str, &'a DecodedImage>,
    ids: &[String],
) -> Result<Vec<&'a DecodedImage>> {
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownLabel(format!("image for id {id}")))
        })
        .collect()
}
