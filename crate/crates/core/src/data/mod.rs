//! Datasets: synthetic generators, TUDataset text files, splitting and the
//! JSON dataset cache.

mod cache;
mod mutag;
mod synthetic;
mod tudataset;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cache::{DatasetCache, GraphRecord, DATASET_SCHEMA_VERSION};
pub use mutag::{
    atom_label, atom_symbol, bundled_mutag_dir, has_nitro_group, load_mutag, MUTAG_ATOMS,
};
pub use synthetic::{
    generate_ba, generate_ba2motifs, generate_balrp, grow_graph, Attachment, DatasetKind,
    GeneratorConfig, BA2MOTIFS_FEATURE_DIM, BA2MOTIFS_FEATURE_VALUE,
};
pub use tudataset::{parse_tudataset, write_tudataset};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Disjoint train/validation/test index lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.validation.is_empty() && self.test.is_empty()
    }
}

/// Ordered graphs sharing one feature space and label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    graphs: Vec<Graph>,
    num_classes: usize,
    feature_dim: usize,
    splits: Splits,
}

impl Dataset {
    /// Validates labels and feature widths; graph ids are reset to positions.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        let feature_dim = graphs.first().map_or(0, Graph::feature_dim);
        let mut out = Vec::with_capacity(graphs.len());
        for (i, g) in graphs.into_iter().enumerate() {
            if g.feature_dim() != feature_dim {
                return Err(Error::invalid(format!(
                    "graph {i} has {} features, expected {feature_dim}",
                    g.feature_dim()
                )));
            }
            if let Some(y) = g.label() {
                if y >= num_classes {
                    return Err(Error::invalid(format!(
                        "graph {i} label {y} >= {num_classes} classes"
                    )));
                }
            }
            out.push(g.with_id(i));
        }
        Ok(Dataset {
            name: name.into(),
            graphs: out,
            num_classes,
            feature_dim,
            splits: Splits::default(),
        })
    }

    pub fn with_splits(mut self, splits: Splits) -> Result<Self> {
        let n = self.graphs.len();
        let mut seen = vec![false; n];
        for &i in splits
            .train
            .iter()
            .chain(&splits.validation)
            .chain(&splits.test)
        {
            if i >= n {
                return Err(Error::invalid(format!(
                    "split index {i} out of range ({n} graphs)"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!(
                    "graph {i} appears in more than one split"
                )));
            }
        }
        self.splits = splits;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&Graph> {
        indices.iter().map(|&i| &self.graphs[i]).collect()
    }

    pub fn mean_nodes(&self) -> f64 {
        let total: usize = self.graphs.iter().map(Graph::num_nodes).sum();
        total as f64 / self.graphs.len().max(1) as f64
    }

    pub fn mean_edges(&self) -> f64 {
        let total: usize = self.graphs.iter().map(Graph::num_edges).sum();
        total as f64 / self.graphs.len().max(1) as f64
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for y in self.graphs.iter().filter_map(Graph::label) {
            counts[y] += 1;
        }
        counts
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid(format!(
                "split ratios {parts:?} must lie in (0, 1)"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios {parts:?} must sum to 1"
            )));
        }
        Ok(())
    }
}

fn floor_count(ratio: f64, n: usize) -> usize {
    // Nudge before flooring so products such as 0.1 * 30 land on 3.
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Shuffles graph indices with `seed` and cuts them into validation and test
/// blocks of `floor(ratio·N)`; the remainder goes to training.
pub fn split_dataset(dataset: Dataset, ratios: &SplitRatios, seed: u64) -> Result<Dataset> {
    ratios.validate()?;
    let n = dataset.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "cannot split {n} graphs three ways"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = floor_count(ratios.validation, n);
    let n_test = floor_count(ratios.test, n);
    let n_train = n - n_val - n_test;
    let splits = Splits {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    dataset.with_splits(splits)
}
