//! Model checkpoint: parameters, architecture and training history, with a
//! hashed reference to the subgraph file the model was trained against.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{ModelSpec, OracleModel};
use super::train::{TrainConfig, TrainedModel, TrainingHistory};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::extract::SubgraphFile;
use crate::numerics::ParameterFile;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub schema_version: u32,
    pub spec: ModelSpec,
    pub train_config: TrainConfig,
    /// Path of the subgraph file, relative to the checkpoint when not absolute.
    pub subgraph_file: PathBuf,
    pub subgraph_hash: String,
    pub dataset_hash: String,
    pub history: TrainingHistory,
    pub parameters: ParameterFile,
}

impl ModelCheckpoint {
    pub fn new(
        trained: &TrainedModel,
        subgraph_file: &SubgraphFile,
        subgraph_path: impl Into<PathBuf>,
    ) -> Self {
        ModelCheckpoint {
            schema_version: MODEL_SCHEMA_VERSION,
            spec: trained.model.spec().clone(),
            train_config: trained.config.clone(),
            subgraph_file: subgraph_path.into(),
            subgraph_hash: crate::io::content_hash(subgraph_file),
            dataset_hash: subgraph_file.dataset_hash.clone(),
            history: trained.history.clone(),
            parameters: ParameterFile::from_store(trained.model.params()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: ModelCheckpoint = crate::io::read_json(path)?;
        if ckpt.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model schema version {}",
                ckpt.schema_version
            )));
        }
        Ok(ckpt)
    }

    /// Rebuilds the trained model, checking that the referenced subgraph file
    /// and `dataset` are the ones it was trained on.
    pub fn restore(self, checkpoint_path: &Path, dataset: &Dataset) -> Result<TrainedModel> {
        let sg_path = if self.subgraph_file.is_absolute() {
            self.subgraph_file.clone()
        } else {
            checkpoint_path
                .parent()
                .unwrap_or(Path::new("."))
                .join(&self.subgraph_file)
        };
        let file = SubgraphFile::load(&sg_path)?;
        if crate::io::content_hash(&file) != self.subgraph_hash {
            return Err(Error::Stale(format!(
                "{} changed since the model was trained",
                sg_path.display()
            )));
        }
        if dataset.content_hash() != self.dataset_hash {
            return Err(Error::Stale(
                "dataset differs from the one used for training".into(),
            ));
        }
        let subgraphs = file.resolve(dataset)?;
        let structures = subgraphs.structures().into_iter().cloned().collect();
        let model = OracleModel::new(self.spec, self.parameters.into_store()?, structures)?;
        Ok(TrainedModel {
            model,
            subgraphs,
            history: self.history,
            config: self.train_config,
        })
    }
}
