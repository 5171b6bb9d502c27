//! Run configuration: a single JSON document.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentPolicy, Size};
use crate::catalog::ClassMap;
use crate::error::{Error, Result};
use crate::extract::PixelExtractor;
use crate::refmodel::adamax::{DEFAULT_BETA1, DEFAULT_BETA2};
use crate::refmodel::HeadTrainConfig;
use crate::trainctl::{ControlConfig, TrainLoopConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub split: u64,
    pub folds: u64,
    pub augment: u64,
    pub batches: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            split: 42,
            folds: 42,
            augment: 42,
            batches: 42,
        }
    }
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            split: seed,
            folds: seed,
            augment: seed,
            batches: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaMaxConfig {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for AdaMaxConfig {
    fn default() -> Self {
        AdaMaxConfig {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
        }
    }
}

/// Registry entry for one backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Input resolution the backbone expects; becomes the augmentation
    /// target size.
    pub input_size: Size,
    pub feature_dim: usize,
    /// Parameter count of the full pretrained model (display only).
    #[serde(default)]
    pub parameters: Option<u64>,
    /// Precomputed FeatureTable from an external extractor. When absent the
    /// built-in pixel extractor is used and `grid` must be set.
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<Size>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    pub class_map: ClassMap,
    pub dedup_threshold: u32,
    pub test_fraction: f64,
    pub k: usize,
    pub seeds: Seeds,
    pub augment: AugmentPolicy,
    pub train: TrainLoopConfig,
    pub control: ControlConfig,
    pub adamax: AdaMaxConfig,
    pub models: BTreeMap<String, ModelSpec>,
    /// Model used when `--model` is not given.
    pub model: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut models = BTreeMap::new();
        models.insert(
            "pixels".to_string(),
            ModelSpec {
                input_size: Size {
                    width: 32,
                    height: 32,
                },
                feature_dim: 8 * 8 * 3,
                parameters: None,
                features: None,
                grid: Some(Size {
                    width: 8,
                    height: 8,
                }),
            },
        );
        RunConfig {
            corpus_root: PathBuf::from("corpus"),
            class_map: ClassMap(Vec::new()),
            dedup_threshold: 0,
            test_fraction: 0.2,
            k: 5,
            seeds: Seeds::default(),
            augment: AugmentPolicy::default(),
            train: TrainLoopConfig::default(),
            control: ControlConfig::default(),
            adamax: AdaMaxConfig::default(),
            models,
            model: "pixels".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // relative paths resolve against the config file's directory
        let base = std::path::absolute(path)
            .map(|p| p.parent().map(Path::to_path_buf).unwrap_or_default())
            .map_err(|e| Error::Config(format!("cannot resolve {}: {e}", path.display())))?;
        if cfg.corpus_root.is_relative() {
            cfg.corpus_root = base.join(&cfg.corpus_root);
        }
        for spec in cfg.models.values_mut() {
            if let Some(f) = &spec.features {
                if f.is_relative() {
                    spec.features = Some(base.join(f));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Check every field and referenced file. `needs_corpus` controls whether
    /// the corpus root must exist (not needed to evaluate a prediction log).
    pub fn validate(&self, needs_corpus: bool) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if needs_corpus && !self.corpus_root.is_dir() {
            return cfg_err(format!(
                "corpus_root {} is not a directory",
                self.corpus_root.display()
            ));
        }
        if self.class_map.0.is_empty() {
            return cfg_err("class_map is empty".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return cfg_err(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.k < 2 {
            return cfg_err(format!("k must be at least 2, got {}", self.k));
        }
        self.augment.validate()?;
        self.train.validate()?;
        self.control.scheduler(self.train.initial_lr)?;
        for (name, b) in [("beta1", self.adamax.beta1), ("beta2", self.adamax.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return cfg_err(format!("adamax {name} must be in [0, 1), got {b}"));
            }
        }
        if self.models.is_empty() {
            return cfg_err("model registry is empty".into());
        }
        for (name, spec) in &self.models {
            if spec.input_size.width == 0 || spec.input_size.height == 0 {
                return cfg_err(format!("model {name}: input_size must be positive"));
            }
            match (&spec.features, &spec.grid) {
                (Some(path), _) => {
                    if !path.is_file() {
                        return cfg_err(format!(
                            "model {name}: features file {} not found",
                            path.display()
                        ));
                    }
                }
                (None, Some(grid)) => {
                    let dim = grid.width as usize * grid.height as usize * 3;
                    if dim != spec.feature_dim {
                        return cfg_err(format!(
                            "model {name}: feature_dim {} does not match grid {}x{}x3 = {dim}",
                            spec.feature_dim, grid.width, grid.height
                        ));
                    }
                }
                (None, None) => {
                    return cfg_err(format!("model {name}: needs either features or grid"))
                }
            }
        }
        self.model_spec(&self.model)?;
        Ok(())
    }

    pub fn model_spec(&self, name: &str) -> Result<&ModelSpec> {
        self.models
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown model {name}")))
    }

    /// Augmentation policy with the target size taken from the model registry.
    pub fn policy_for(&self, model: &str) -> Result<AugmentPolicy> {
        let spec = self.model_spec(model)?;
        Ok(AugmentPolicy {
            target_size: spec.input_size,
            ..self.augment.clone()
        })
    }

    pub fn pixel_extractor(&self, model: &str) -> Result<Option<PixelExtractor>> {
        let spec = self.model_spec(model)?;
        if spec.features.is_some() {
            return Ok(None);
        }
        let grid = spec
            .grid
            .ok_or_else(|| Error::Config(format!("model {model}: missing grid")))?;
        Ok(Some(PixelExtractor {
            policy: self.policy_for(model)?,
            grid,
        }))
    }

    pub fn head_config(&self) -> HeadTrainConfig {
        HeadTrainConfig {
            train: self.train.clone(),
            control: self.control.clone(),
            beta1: self.adamax.beta1,
            beta2: self.adamax.beta2,
            seed: self.seeds.batches,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ClassMap;

    fn valid() -> RunConfig {
        RunConfig {
            class_map: ClassMap::identity(&["a", "b"]),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_carry_training_constants() {
        let c = RunConfig::default();
        assert_eq!(c.test_fraction, 0.2);
        assert_eq!(c.k, 5);
        assert_eq!(c.train.max_epochs, 50);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.control.plateau_factor, 1e-3);
        assert_eq!(c.control.plateau_patience, 3);
        assert_eq!(c.control.early_stop_patience, 7);
        assert_eq!(c.augment.rotation_max_deg, 20.0);
    }

    #[test]
    fn validation_catches_bad_fields() {
        assert!(valid().validate(false).is_ok());
        let mut c = valid();
        c.k = 1;
        assert!(c.validate(false).unwrap_err().is_config());
        let mut c = valid();
        c.model = "nope".into();
        assert!(c.validate(false).is_err());
        let mut c = valid();
        c.models.get_mut("pixels").unwrap().feature_dim = 10;
        assert!(c.validate(false).is_err());
        let c = RunConfig {
            class_map: ClassMap(vec![]),
            ..valid()
        };
        assert!(c.validate(false).is_err());
        assert!(
            valid().validate(true).is_err(),
            "corpus root does not exist"
        );
    }

    #[test]
    fn json_round_trip_and_partial_documents() {
        let c = valid();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig =
            serde_json::from_str(r#"{"k": 3, "class_map": [{"dir": "x", "class": "y"}]}"#).unwrap();
        assert_eq!(partial.k, 3);
        assert_eq!(partial.train.batch_size, 32);
    }

    #[test]
    fn policy_takes_registry_size() {
        let c = valid();
        assert_eq!(
            c.policy_for("pixels").unwrap().target_size,
            Size {
                width: 32,
                height: 32
            }
        );
    }
}
