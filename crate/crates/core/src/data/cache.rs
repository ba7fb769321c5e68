use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Tensor;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
    pub label: Option<usize>,
}

/// Serialized dataset: one JSON document per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCache {
    pub schema_version: u32,
    pub name: String,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub graphs: Vec<GraphRecord>,
    pub splits: Splits,
}

impl From<&Dataset> for DatasetCache {
    fn from(d: &Dataset) -> Self {
        let graphs = d
            .graphs()
            .iter()
            .map(|g| GraphRecord {
                edges: g.edges().to_vec(),
                features: (0..g.num_nodes())
                    .map(|v| g.features().row(v).to_vec())
                    .collect(),
                label: g.label(),
            })
            .collect();
        DatasetCache {
            schema_version: DATASET_SCHEMA_VERSION,
            name: d.name().to_string(),
            num_classes: d.num_classes(),
            feature_dim: d.feature_dim(),
            graphs,
            splits: d.splits().clone(),
        }
    }
}

impl DatasetCache {
    pub fn into_dataset(self) -> Result<Dataset> {
        if self.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported dataset schema version {}",
                self.schema_version
            )));
        }
        let mut graphs = Vec::with_capacity(self.graphs.len());
        for (i, rec) in self.graphs.into_iter().enumerate() {
            let n = rec.features.len();
            let features = if n == 0 {
                Tensor::zeros(0, self.feature_dim)
            } else {
                Tensor::from_rows(&rec.features)?
            };
            if features.cols() != self.feature_dim {
                return Err(Error::invalid(format!(
                    "graph {i}: {} features, header says {}",
                    features.cols(),
                    self.feature_dim
                )));
            }
            graphs.push(Graph::new(i, rec.edges, features, rec.label)?);
        }
        Dataset::new(self.name, graphs, self.num_classes)?.with_splits(self.splits)
    }
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &DatasetCache::from(self))
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        crate::io::read_json::<DatasetCache>(path)?.into_dataset()
    }

    /// Hash of the serialized form, used to tie downstream artifacts to it.
    pub fn content_hash(&self) -> String {
        crate::io::content_hash(&DatasetCache::from(self))
    }
}
