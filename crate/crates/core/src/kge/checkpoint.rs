use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingModel, Parameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "kgrecon-checkpoint";

/// JSON checkpoint layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    #[serde(flatten)]
    pub parameters: Parameters,
    pub thresholds: Vec<f64>,
    pub global_threshold: f64,
}

impl Checkpoint {
    pub fn from_model(m: &EmbeddingModel, config_hash: &str) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: m.seed(),
            config_hash: config_hash.to_string(),
            parameters: m.parameters().clone(),
            thresholds: m.thresholds().to_vec(),
            global_threshold: m.global_threshold(),
        }
    }

    pub fn into_model(self) -> Result<EmbeddingModel> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        if self.thresholds.len() != self.parameters.num_relations {
            return Err(Error::Checkpoint("threshold count does not match relation count".into()));
        }
        if !self.parameters.all_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        let mut m = EmbeddingModel::from_parameters(self.parameters, self.seed)?;
        m.thresholds = self.thresholds;
        m.global_threshold = self.global_threshold;
        Ok(m)
    }
}

pub fn save_checkpoint(m: &EmbeddingModel, config_hash: &str, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::from_model(m, config_hash))?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(EmbeddingModel, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    let hash = ckpt.config_hash.clone();
    Ok((ckpt.into_model()?, hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityId, RelationId, Triple};

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut m = EmbeddingModel::from_score_table(3, 2, |t| {
            (t.head.0 as f64 * 0.1 + 1.0 / 3.0) - t.tail.0 as f64 * std::f64::consts::PI + t.relation.0 as f64
        });
        m.set_threshold(RelationId(1), 0.123456789012345);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&m, "abc", &path).unwrap();
        let (back, hash) = load_checkpoint(&path).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(back, m);
        let t = Triple::new(EntityId(2), RelationId(1), EntityId(0));
        assert_eq!(back.raw_score(&t).to_bits(), m.raw_score(&t).to_bits());
    }
}
