//! Run configuration: dataset source, loss mode, optimizer and loop
//! hyperparameters. Configs load from JSON; unknown top-level keys are
//! rejected so typos surface as config errors instead of silently applying
//! defaults.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::augment::AugmentPolicy;
use crate::dataset::{self, Dataset, Manifest};
use crate::ensemble::TransformEnsemble;
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::objectives::{LossWeights, SinkhornConfig};
use crate::optim::AdamConfig;

/// Loss preset: which of the three components are active.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All three losses (1, 1, 1).
    Concurl,
    /// Similarity loss only (1, 0, 0).
    Byol,
    /// Swapped clustering loss only (0, 1, 0).
    Soft,
    /// Similarity plus swapped clustering (1, 1, 0).
    ByolSoft,
}

impl Mode {
    pub fn weights(self) -> LossWeights {
        let (alpha, beta, gamma) = match self {
            Mode::Concurl => (1.0, 1.0, 1.0),
            Mode::Byol => (1.0, 0.0, 0.0),
            Mode::Soft => (0.0, 1.0, 0.0),
            Mode::ByolSoft => (1.0, 1.0, 0.0),
        };
        LossWeights { alpha, beta, gamma }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Concurl => "concurl",
            Mode::Byol => "byol",
            Mode::Soft => "soft",
            Mode::ByolSoft => "byol_soft",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concurl" => Ok(Mode::Concurl),
            "byol" => Ok(Mode::Byol),
            "soft" => Ok(Mode::Soft),
            "byol_soft" => Ok(Mode::ByolSoft),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected concurl, byol, soft, or byol_soft)"
            ))),
        }
    }
}

/// Where the training data comes from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Synthetic isotropic Gaussian clusters.
    Blobs {
        num_clusters: usize,
        dim: usize,
        points_per_cluster: usize,
        #[serde(default = "default_center_scale")]
        center_scale: f64,
        #[serde(default = "default_noise_sigma")]
        noise_sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Headerless numeric CSV with one label column.
    Csv { path: PathBuf, label_column: usize },
    /// IDX image/label file pair.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// A dataset manifest written by `generate-data`.
    Manifest { path: PathBuf },
}

fn default_center_scale() -> f64 {
    5.0
}

fn default_noise_sigma() -> f64 {
    1.0
}

impl DatasetSpec {
    /// Loads the dataset. File paths resolve relative to the current
    /// directory; paths inside a manifest resolve relative to the manifest.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Blobs {
                num_clusters,
                dim,
                points_per_cluster,
                center_scale,
                noise_sigma,
                seed,
            } => dataset::generate_blobs(
                *num_clusters,
                *dim,
                *points_per_cluster,
                *center_scale,
                *noise_sigma,
                *seed,
            ),
            DatasetSpec::Csv { path, label_column } => dataset::load_csv(path, *label_column),
            DatasetSpec::Idx { images, labels, limit } => {
                dataset::load_idx_images(images, labels, *limit)
            }
            DatasetSpec::Manifest { path } => Manifest::load(path)?.load_dataset(path),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKindConfig {
    GaussianProjection,
    Diagonal,
}

/// How to generate the fixed transform ensemble.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnsembleConfig {
    pub kind: EnsembleKindConfig,
    pub m: usize,
    /// Projection output dimension; defaults to a quarter of the cluster
    /// embedding dimension (at least 1). Ignored for diagonal transforms.
    #[serde(default)]
    pub d_out: Option<usize>,
    /// Defaults to a value derived from the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            kind: EnsembleKindConfig::GaussianProjection,
            m: 10,
            d_out: None,
            seed: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("ensemble size m must be at least 1".into()));
        }
        if self.d_out == Some(0) {
            return Err(Error::Config("d_out must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds the ensemble for cluster embeddings of dimension `d`.
    pub fn build(&self, d: usize, fallback_seed: u64) -> Result<TransformEnsemble> {
        self.validate()?;
        let seed = self.seed.unwrap_or(fallback_seed);
        match self.kind {
            EnsembleKindConfig::GaussianProjection => {
                let d_out = self.d_out.unwrap_or((d / 4).max(1));
                TransformEnsemble::gaussian_projections(self.m, d, d_out, seed)
            }
            EnsembleKindConfig::Diagonal => TransformEnsemble::diagonal_transforms(self.m, d, seed),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    /// Retention factor of the target network's moving average.
    #[serde(default = "default_tau_b")]
    pub tau_b: f64,
    /// Softmax temperature of the cluster assignment.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub sinkhorn: SinkhornConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// View augmentation; its seed field is overridden per step from the run
    /// seed.
    #[serde(default)]
    pub augment: AugmentPolicy,
    /// Network widths; defaults to a stack sized from the input dimension.
    #[serde(default)]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate (and measure diversity) every this many epochs.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    pub output_dir: PathBuf,
}

fn default_mode() -> Mode {
    Mode::Concurl
}

fn default_learning_rate() -> f64 {
    5e-4
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_adam_eps() -> f64 {
    1e-8
}

fn default_tau_b() -> f64 {
    0.99
}

fn default_temperature() -> f64 {
    0.1
}

fn default_eval_every() -> usize {
    5
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        self.mode.weights()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        self.adam().validate()?;
        if !(0.0..=1.0).contains(&self.tau_b) {
            return Err(Error::Config(format!("tau_b must lie in [0, 1], got {}", self.tau_b)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        self.sinkhorn.validate()?;
        self.ensemble.validate()?;
        self.augment.validate()?;
        if let Some(network) = &self.network {
            network.validate()?;
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: TrainConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serializing config: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
