//! Synthetic five-class image corpus for smoke runs and acceptance tests.
//!
//! Each class has its own base color and texture (stripe orientation and
//! frequency plus spot density); every image adds its own color offset,
//! stripe phase and pixel noise, so dHashes of distinct images differ.
//! Optional byte-identical duplicates are written under `<class>/mirror/`.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::rng::Stream;

pub const CLASSES: [&str; 5] = [
    "psoriasis",
    "dermatitis",
    "lichen_planus",
    "pityriasis_rosea",
    "healthy",
];

struct Style {
    base: [f64; 3],
    angle_deg: f64,
    frequency: f64,
    stripe_amp: f64,
    spot_prob: f64,
    spot_shift: [f64; 3],
}

const STYLES: [Style; 5] = [
    Style {
        base: [196.0, 72.0, 70.0],
        angle_deg: 0.0,
        frequency: 0.9,
        stripe_amp: 20.0,
        spot_prob: 0.10,
        spot_shift: [50.0, 50.0, 50.0],
    },
    Style {
        base: [214.0, 150.0, 110.0],
        angle_deg: 90.0,
        frequency: 0.6,
        stripe_amp: 16.0,
        spot_prob: 0.02,
        spot_shift: [-40.0, -60.0, -40.0],
    },
    Style {
        base: [120.0, 64.0, 140.0],
        angle_deg: 45.0,
        frequency: 1.2,
        stripe_amp: 16.0,
        spot_prob: 0.05,
        spot_shift: [60.0, 60.0, 60.0],
    },
    Style {
        base: [205.0, 115.0, 165.0],
        angle_deg: 135.0,
        frequency: 0.45,
        stripe_amp: 20.0,
        spot_prob: 0.0,
        spot_shift: [0.0, 0.0, 0.0],
    },
    Style {
        base: [230.0, 195.0, 165.0],
        angle_deg: 0.0,
        frequency: 0.2,
        stripe_amp: 8.0,
        spot_prob: 0.01,
        spot_shift: [-30.0, -30.0, -30.0],
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Unique images per class, in [`CLASSES`] order (at most five entries).
    pub per_class: Vec<usize>,
    pub size: u32,
    pub duplicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub classes: Vec<String>,
    pub unique: usize,
    pub duplicates: usize,
    pub files: usize,
}

pub fn render(class: usize, index: usize, size: u32, seed: u64) -> RgbImage {
    let style = &STYLES[class];
    let mut s = Stream::derive(
        seed,
        "synth",
        &[&(class as u64).to_le_bytes(), &(index as u64).to_le_bytes()],
    );
    let jitter: [f64; 3] = std::array::from_fn(|_| s.unit_f64() * 30.0 - 15.0);
    let phase = s.unit_f64() * std::f64::consts::TAU;
    // coarse random shading, upsampled, so distinct images get distinct dHashes
    let coarse: Vec<f64> = (0..9 * 8).map(|_| s.unit_f64() * 120.0 - 60.0).collect();
    let shading = Raster::new(9, 8, 1, coarse).resize_bilinear(size as usize, size as usize);
    let (sin, cos) = style.angle_deg.to_radians().sin_cos();
    let mut img = RgbImage::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let t = (x as f64 * cos + y as f64 * sin) * style.frequency + phase;
            let stripe = style.stripe_amp * t.sin();
            let shade = shading.get(x as usize, y as usize, 0);
            let spot = s.unit_f64() < style.spot_prob;
            let px = std::array::from_fn(|c| {
                let noise = s.unit_f64() * 36.0 - 18.0;
                let shift = if spot { style.spot_shift[c] } else { 0.0 };
                (style.base[c] + jitter[c] + stripe + shade + noise + shift)
                    .round()
                    .clamp(0.0, 255.0) as u8
            });
            img.put_pixel(x, y, Rgb(px));
        }
    }
    img
}

pub fn generate_corpus(dir: &Path, spec: &SynthSpec) -> Result<SynthSummary> {
    if spec.per_class.is_empty() || spec.per_class.len() > CLASSES.len() {
        return Err(Error::Config(format!(
            "per_class needs 1..={} entries",
            CLASSES.len()
        )));
    }
    if spec.size < 9 {
        return Err(Error::Config(
            "synthetic image size must be at least 9".into(),
        ));
    }
    let mut written: Vec<(usize, std::path::PathBuf)> = Vec::new();
    for (c, &n) in spec.per_class.iter().enumerate() {
        let class_dir = dir.join(CLASSES[c]);
        fs::create_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        for i in 0..n {
            let path = class_dir.join(format!("img_{i:05}.png"));
            render(c, i, spec.size, spec.seed)
                .save(&path)
                .map_err(|e| Error::BadImage {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            written.push((c, path));
        }
    }
    let unique = written.len();
    if spec.duplicates > 0 && unique == 0 {
        return Err(Error::Config(
            "cannot duplicate from an empty corpus".into(),
        ));
    }
    let mut s = Stream::derive(spec.seed, "synth-dups", &[]);
    let mut pool: Vec<usize> = (0..unique).collect();
    s.shuffle(&mut pool);
    for d in 0..spec.duplicates {
        let (c, src) = &written[pool[d % unique]];
        let mirror = dir.join(CLASSES[*c]).join("mirror");
        fs::create_dir_all(&mirror).map_err(|e| Error::io(&mirror, e))?;
        let dst = mirror.join(format!("dup_{d:05}.png"));
        fs::copy(src, &dst).map_err(|e| Error::io(&dst, e))?;
    }
    Ok(SynthSummary {
        classes: CLASSES[..spec.per_class.len()]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        unique,
        duplicates: spec.duplicates,
        files: unique + spec.duplicates,
    })
}
