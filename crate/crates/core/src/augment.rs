//! Normalization, random rotation, flips and resizing.
//!
//! Training samples are augmented with draws from a stream keyed by
//! `(master_seed, record_id, epoch)`, so the output for a sample never
//! depends on which worker processed it or in what order. Draw order per
//! sample is fixed: rotation angle, horizontal-flip coin, vertical-flip coin.
//!
//! Pipeline: normalize, then (training only) rotate, h-flip, v-flip, then
//! resize to the target size.

use std::path::Path;

use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub rotation_max_deg: f64,
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    pub target_size: Size,
    pub normalize: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            rotation_max_deg: 20.0,
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            target_size: Size {
                width: 224,
                height: 224,
            },
            normalize: true,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.rotation_max_deg) {
            return Err(Error::Config(format!(
                "rotation_max_deg must be in [0, 360), got {}",
                self.rotation_max_deg
            )));
        }
        for (name, p) in [
            ("hflip_prob", self.hflip_prob),
            ("vflip_prob", self.vflip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.target_size.width == 0 || self.target_size.height == 0 {
            return Err(Error::Config("target_size must be positive".into()));
        }
        Ok(())
    }

    /// Policy with augmentation disabled (rotation 0, no flips).
    pub fn identity(target_size: Size) -> Self {
        AugmentPolicy {
            rotation_max_deg: 0.0,
            hflip_prob: 0.0,
            vflip_prob: 0.0,
            target_size,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSeed<'a> {
    pub master_seed: u64,
    pub record_id: &'a str,
    pub epoch: u64,
}

impl SampleSeed<'_> {
    pub fn stream(&self) -> Stream {
        Stream::derive(
            self.master_seed,
            "augment",
            &[self.record_id.as_bytes(), &self.epoch.to_le_bytes()],
        )
    }
}

/// The random choices made for one training sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub angle_deg: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl AugmentDraw {
    pub fn sample(policy: &AugmentPolicy, seed: &SampleSeed<'_>) -> Self {
        let mut s = seed.stream();
        let angle_deg = s.unit_f64() * policy.rotation_max_deg;
        let hflip = s.unit_f64() < policy.hflip_prob;
        let vflip = s.unit_f64() < policy.vflip_prob;
        AugmentDraw {
            angle_deg,
            hflip,
            vflip,
        }
    }
}

pub fn normalize_value(value: u32, depth: u32) -> f64 {
    value as f64 / ((1u64 << depth) - 1) as f64
}

/// Scale raw integer channel values of bit depth `depth` into [0, 1].
pub fn normalize(raster: &Raster, depth: u32) -> Raster {
    let max = ((1u64 << depth) - 1) as f64;
    raster.map(|v| v / max)
}

pub fn apply_raster(
    raw: &Raster,
    depth: u32,
    policy: &AugmentPolicy,
    seed: &SampleSeed<'_>,
    training: bool,
) -> Raster {
    let mut img = if policy.normalize {
        normalize(raw, depth)
    } else {
        raw.clone()
    };
    if training {
        let draw = AugmentDraw::sample(policy, seed);
        img = img.rotate(draw.angle_deg);
        if draw.hflip {
            img = img.flip_horizontal();
        }
        if draw.vflip {
            img = img.flip_vertical();
        }
    }
    let out = img.resize_bilinear(
        policy.target_size.width as usize,
        policy.target_size.height as usize,
    );
    if policy.normalize {
        out.map(|v| v.clamp(0.0, 1.0))
    } else {
        out
    }
}

pub fn apply_pipeline(
    image: &DynamicImage,
    policy: &AugmentPolicy,
    seed: &SampleSeed<'_>,
    training: bool,
) -> Raster {
    let (raw, depth) = Raster::from_image(image);
    apply_raster(&raw, depth, policy, seed, training)
}

/// 8-bit RGB rendering of a [0, 1] tensor.
pub fn to_rgb8(t: &Raster) -> RgbImage {
    let mut img = RgbImage::new(t.width as u32, t.height as u32);
    for y in 0..t.height {
        for x in 0..t.width {
            let px = std::array::from_fn(|c| {
                let v = t.get(x, y, c.min(t.channels - 1));
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            });
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img
}

/// Write `{id}_{epoch}.png` into `dir` and return its path.
pub fn materialize(t: &Raster, dir: &Path, id: &str, epoch: u64) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("{id}_{epoch}.png"));
    to_rgb8(t).save(&path).map_err(|e| Error::BadImage {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    Ok(path)
}
