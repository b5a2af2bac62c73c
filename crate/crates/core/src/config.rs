//! Run configuration shared by every command, and the artifact envelope
//! that records its hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::explain::{ExplainConfig, TemplateSet};
use crate::feedback::ExperimentConfig;
use crate::kg::{load_dataset, DatasetFormat, DatasetSplits, Vocabulary};
use crate::kge::TrainConfig;
use crate::sfe::SubstitutionMode;
use crate::surrogate::{SurrogateConfig, SurrogateMode};
use crate::synth::{household, HouseholdConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Dataset directory (tsv) or file (json). The synthetic household graph
    /// when unset.
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub synthetic: HouseholdConfig,
    pub seed: u64,
    pub train: TrainConfig,
    pub k_substitution: usize,
    pub substitution: SubstitutionMode,
    pub surrogate: SurrogateConfig,
    /// Modes scored by `evaluate-fidelity`.
    pub modes: Vec<SurrogateMode>,
    pub explain: ExplainConfig,
    /// Template TOML. Bundled household templates, or generic sentences
    /// for other vocabularies, when unset.
    pub templates: Option<PathBuf>,
    pub experiment: ExperimentConfig,
    /// Suspect inferences explained when a review store is created.
    pub review_explanations: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            format: DatasetFormat::Tsv,
            synthetic: HouseholdConfig::default(),
            seed: 0,
            train: TrainConfig::household(),
            k_substitution: 5,
            substitution: SubstitutionMode::Both,
            surrogate: SurrogateConfig::default(),
            modes: SurrogateMode::ALL.to_vec(),
            explain: ExplainConfig::default(),
            templates: None,
            experiment: ExperimentConfig::default(),
            review_explanations: 20,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Read JSON, or TOML for a `.toml` extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Seed every stage from one value.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.surrogate.seed = seed;
        self.experiment.train.seed = seed;
        self.experiment.surrogate.seed = seed;
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.surrogate.validate()?;
        self.experiment.validate()
    }

    pub fn load_dataset(&self) -> Result<DatasetSplits> {
        match &self.dataset {
            Some(p) => Ok(load_dataset(p, self.format)?.0),
            None => Ok(household(&self.synthetic)),
        }
    }

    pub fn templates(&self, vocab: &Vocabulary) -> Result<TemplateSet> {
        match &self.templates {
            Some(p) => TemplateSet::load(p),
            None => Ok(TemplateSet::covering(vocab)),
        }
    }
}

/// JSON envelope written by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub config_hash: String,
    pub data: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(kind: &str, config_hash: &str, data: T) -> Self {
        Artifact { kind: kind.into(), config_hash: config_hash.into(), data }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}
