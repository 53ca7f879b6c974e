use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Classifier, LstmClassifier, Mlp};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "pon-sentinel/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ModelParams {
    Lstm(LstmClassifier),
    Mlp(Mlp),
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Lstm(m) => m.validate(),
            ModelParams::Mlp(m) => m.validate(),
        }
    }

    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            ModelParams::Lstm(m) => m,
            ModelParams::Mlp(m) => m,
        }
    }
}

/// Trained parameters plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub model: ModelParams,
}

impl Checkpoint {
    pub fn new(model: ModelParams, train_config: TrainConfig) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed: train_config.seed,
            train_config,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Checkpoint> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("not a checkpoint: format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", ck.version)));
        }
        ck.model.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }

    /// Short content hash identifying these exact parameters.
    pub fn id(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }

    pub fn classifier(&self) -> &dyn Classifier {
        self.model.classifier()
    }
}
