//! Dataset curation and evaluation toolkit for multiclass skin-lesion
//! classification: corpus cataloguing, dHash deduplication, stratified
//! holdout and k-fold partitioning, seeded augmentation, a dense softmax
//! head trained with AdaMax under plateau / early-stop control, and
//! support-weighted metrics aggregated over folds.

pub mod augment;
pub mod catalog;
pub mod config;
pub mod dedup;
pub mod error;
pub mod extract;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod raster;
pub mod refmodel;
pub mod report;
pub mod rng;
pub mod synth;
pub mod tables;
pub mod trainctl;

pub use error::{Error, Result};
