use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureMode, DropoutPlacement, NetworkSpec};
use crate::data::{generate_synthetic, load_manifest, Dataset, SyntheticSpec, DEFAULT_RATIOS};
use crate::encoder::{EncoderFamily, EncoderSpec};
use crate::error::{Error, Result};
use crate::nn::DropoutSpec;
use crate::train::{AdamConfig, LossWeights, ScheduleConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// Relative paths resolve against the config file's directory.
    Manifest { path: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
            DatasetSource::Manifest { path } => load_manifest(path),
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let DatasetSource::Manifest { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Encoder settings; unset fields take family defaults once the input
/// width is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub family: EncoderFamily,
    pub feature_dim: usize,
    pub hidden: Option<Vec<usize>>,
    pub input_shape: Option<Vec<usize>>,
    pub patch: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            family: EncoderFamily::Mlp,
            feature_dim: 64,
            hidden: None,
            input_shape: None,
            patch: None,
        }
    }
}

impl EncoderConfig {
    /// Switches family, dropping settings that only made sense for the
    /// previous one.
    pub fn with_family(&self, family: EncoderFamily) -> Self {
        if family == self.family {
            return self.clone();
        }
        Self {
            family,
            feature_dim: self.feature_dim,
            ..Default::default()
        }
    }

    pub fn spec(&self, input_len: usize) -> Result<EncoderSpec> {
        let input_shape = match &self.input_shape {
            Some(shape) => shape.clone(),
            None if self.family == EncoderFamily::Mlp => vec![input_len],
            None => {
                let side = (input_len as f64).sqrt().round() as usize;
                if side * side != input_len {
                    return Err(Error::Config(format!(
                        "{} needs input_shape; {input_len} features are not a square image",
                        self.family
                    )));
                }
                vec![1, side, side]
            }
        };
        let hidden = self.hidden.clone().unwrap_or_else(|| match self.family {
            EncoderFamily::Mlp => vec![64],
            EncoderFamily::TinyCnn => Vec::new(),
            EncoderFamily::TinyAttention => vec![16],
        });
        let spec = EncoderSpec {
            family: self.family,
            input_shape,
            feature_dim: self.feature_dim,
            hidden,
            patch: self.patch.unwrap_or(crate::encoder::DEFAULT_PATCH),
        };
        if spec.input_len() != input_len {
            return Err(Error::Config(format!(
                "encoder input_shape {:?} holds {} values but samples have {input_len}",
                spec.input_shape,
                spec.input_len()
            )));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// One training run, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub encoder: EncoderConfig,
    pub mode: ArchitectureMode,
    pub lambda1: f64,
    pub lambda2: f64,
    pub dropout: f64,
    pub dropout_placement: DropoutPlacement,
    pub cascade_logit_dropout: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: ScheduleConfig,
    pub adam: AdamConfig,
    /// Drives initialization, split, shuffling and dropout.
    pub seed: u64,
    pub split: [f64; 3],
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            encoder: EncoderConfig::default(),
            mode: ArchitectureMode::Parallel,
            lambda1: 0.5,
            lambda2: 0.5,
            dropout: 0.0,
            dropout_placement: DropoutPlacement::default(),
            cascade_logit_dropout: false,
            epochs: 25,
            batch_size: 32,
            schedule: ScheduleConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
            split: DEFAULT_RATIOS,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub(crate) fn resolve_paths(&mut self, base: &Path) {
        self.dataset.resolve(base);
        if let Some(out) = &mut self.out_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
    }

    pub fn weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.lambda1, self.lambda2)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights()?;
        DropoutSpec::new(self.dropout)?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.encoder.feature_dim == 0 {
            return Err(Error::Config("encoder feature_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            weights: self.weights()?,
            schedule: self.schedule,
            adam: self.adam,
            seed: self.seed,
        })
    }

    pub fn network_spec(&self, dataset: &Dataset) -> Result<NetworkSpec> {
        let width = dataset
            .feature_dim()
            .ok_or_else(|| Error::Data("dataset has no samples".into()))?;
        let mut spec = NetworkSpec::new(self.encoder.spec(width)?, self.mode, self.dropout);
        spec.dropout_placement = self.dropout_placement;
        spec.cascade_logit_dropout = self.cascade_logit_dropout;
        Ok(spec.with_taxonomy(&dataset.taxonomy))
    }
}
