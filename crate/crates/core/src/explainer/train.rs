use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fc::{FcConfig, FcStack, Mode};
use super::kernel::KernelConfig;
use super::loss::check_lambda;
use super::model::{ModelSpec, OracleModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::extract::SubgraphSet;
use crate::gin::{GinConfig, GinEncoder};
use crate::graph::Graph;
use crate::numerics::{AdamConfig, ParameterStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the classification loss; `1 - lambda` weighs the entropy term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub fc: FcConfig,
    pub gin: GinConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.94,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 64,
            seed: 0,
            kernel: KernelConfig::default(),
            fc: FcConfig::default(),
            gin: GinConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        self.kernel.validate()?;
        self.fc.validate()?;
        self.gin.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-size weighted mean of the training objective.
    pub loss: f64,
    pub classification_loss: f64,
    pub regularization_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,loss,classification_loss,regularization_loss,train_accuracy,validation_accuracy,validation_loss\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.loss,
                r.classification_loss,
                r.regularization_loss,
                r.train_accuracy,
                opt(r.validation_accuracy),
                opt(r.validation_loss)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_text(path, &self.to_csv())
    }
}

/// A trained classifier plus everything needed to explain it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: OracleModel,
    pub subgraphs: SubgraphSet,
    pub history: TrainingHistory,
    pub config: TrainConfig,
}

pub fn build_spec(
    dataset: &Dataset,
    subgraphs: &SubgraphSet,
    config: &TrainConfig,
) -> Result<ModelSpec> {
    let encoder = GinEncoder::new(config.gin.clone(), dataset.feature_dim())?;
    let fc = FcStack::new(config.fc, subgraphs.len(), dataset.num_classes())?;
    ModelSpec::new(encoder, config.kernel, fc)
}

/// `ceil(n / max_size)` consecutive chunks whose sizes differ by at most one.
pub(crate) fn balanced_chunks<T>(items: &[T], max_size: usize) -> impl Iterator<Item = &[T]> {
    let count = items.len().div_ceil(max_size.max(1));
    let base = items.len().checked_div(count).unwrap_or(0);
    let extra = items.len().checked_rem(count).unwrap_or(0);
    let mut start = 0;
    (0..count).map(move |i| {
        let len = base + usize::from(i < extra);
        let chunk = &items[start..start + len];
        start += len;
        chunk
    })
}

fn diverged(epoch: usize, err: Error) -> Error {
    match err {
        Error::InvalidArgument(msg) if msg.starts_with("non-finite") => {
            Error::Training { epoch, msg }
        }
        other => other,
    }
}

/// Trains on the dataset's train split, keeping the parameters of the epoch
/// with the best validation accuracy (lower validation loss breaks ties).
/// Without a validation split, training accuracy is used instead.
pub fn train(
    dataset: &Dataset,
    subgraphs: &SubgraphSet,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if subgraphs.is_empty() {
        return Err(Error::invalid("cannot train with an empty subgraph set"));
    }
    let train_idx = dataset.splits().train.clone();
    if train_idx.is_empty() {
        return Err(Error::invalid("the train split is empty"));
    }
    let val_graphs = dataset.select(&dataset.splits().validation);
    let train_graphs = dataset.select(&train_idx);

    let spec = build_spec(dataset, subgraphs, config)?;
    let mut store = spec.init_params(config.seed);
    let adam = AdamConfig::with_lr(config.learning_rate);
    let structures = subgraphs.structures();
    let owned: Vec<Graph> = structures.iter().map(|g| (*g).clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_da7a);

    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, f64, ParameterStore)> = None;
    let mut order = train_idx.clone();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut clas, mut reg) = (0.0, 0.0, 0.0);
        for chunk in balanced_chunks(&order, config.batch_size) {
            let batch: Vec<&Graph> = chunk.iter().map(|&i| dataset.graph(i)).collect();
            let (parts, grads) = spec
                .loss_and_gradients(
                    &store,
                    &batch,
                    &structures,
                    config.lambda,
                    Mode::Train,
                    &mut rng,
                )
                .map_err(|e| diverged(epoch, e))?;
            if let Some((name, _)) = grads.iter().find(|(_, g)| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    msg: format!("non-finite gradient for {name}"),
                });
            }
            store.adam_step(&grads, &adam)?;
            let w = chunk.len() as f64;
            total += w * parts.total;
            clas += w * parts.classification;
            reg += w * parts.regularization;
        }
        let n = order.len() as f64;

        let model = OracleModel::new(spec.clone(), store.clone(), owned.clone())?;
        let (train_acc, train_loss) = model
            .evaluate(&train_graphs)
            .map_err(|e| diverged(epoch, e))?;
        let (val_acc, val_loss) = if val_graphs.is_empty() {
            (None, None)
        } else {
            let (a, l) = model
                .evaluate(&val_graphs)
                .map_err(|e| diverged(epoch, e))?;
            (Some(a), Some(l))
        };
        let record = EpochRecord {
            epoch,
            loss: total / n,
            classification_loss: clas / n,
            regularization_loss: reg / n,
            train_accuracy: train_acc,
            validation_accuracy: val_acc,
            validation_loss: val_loss,
        };
        log::debug!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val acc {:?}",
            record.loss,
            train_acc,
            val_acc
        );
        history.epochs.push(record);

        let (score, tie) = (val_acc.unwrap_or(train_acc), val_loss.unwrap_or(train_loss));
        let improved = match &best {
            None => true,
            Some((s, t, _)) => score > *s || (score == *s && tie < *t),
        };
        if improved {
            history.best_epoch = epoch;
            best = Some((score, tie, store.clone()));
        }
    }

    let (_, _, params) = best.expect("at least one epoch ran");
    let model = OracleModel::new(spec, params, owned)?;
    Ok(TrainedModel {
        model,
        subgraphs: subgraphs.clone(),
        history,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Splits;
    use crate::extract::Subgraph;
    use crate::graph::NodeSet;
    use crate::numerics::Tensor;

    #[test]
    fn balanced_chunk_sizes() {
        let sizes = |n: usize, b: usize| {
            let items: Vec<usize> = (0..n).collect();
            balanced_chunks(&items, b)
                .map(<[usize]>::len)
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(152, 150), vec![76, 76]);
        assert_eq!(sizes(10, 3), vec![3, 3, 2, 2]);
        assert_eq!(sizes(800, 800), vec![800]);
        assert_eq!(sizes(5, 64), vec![5]);
        assert!(sizes(0, 4).is_empty());
        let items: Vec<usize> = (0..10).collect();
        let joined: Vec<usize> = balanced_chunks(&items, 4).flatten().copied().collect();
        assert_eq!(joined, items);
    }

    /// Triangle with feature 1 (class 0) and a 3-path with feature -1 (class 1).
    fn toy() -> (Dataset, SubgraphSet) {
        let tri = Graph::new(
            0,
            [(0, 1), (1, 2), (2, 0)],
            Tensor::filled(3, 1, 1.0),
            Some(0),
        )
        .unwrap();
        let path = Graph::new(1, [(0, 1), (1, 2)], Tensor::filled(3, 1, -1.0), Some(1)).unwrap();
        let ds = Dataset::new("toy", vec![tri, path], 2)
            .unwrap()
            .with_splits(Splits {
                train: vec![0, 1],
                ..Splits::default()
            })
            .unwrap();
        let set = SubgraphSet::new(vec![
            Subgraph::new(ds.graph(0), NodeSet::new(0, [0, 1])).unwrap(),
            Subgraph::new(ds.graph(1), NodeSet::new(1, [0, 1])).unwrap(),
            Subgraph::new(ds.graph(1), NodeSet::new(1, [1, 2])).unwrap(),
        ])
        .unwrap();
        (ds, set)
    }

    fn toy_config(lambda: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            lambda,
            epochs,
            batch_size: 2,
            seed: 11,
            gin: GinConfig {
                hidden_dims: vec![8, 8],
                ..GinConfig::default()
            },
            fc: FcConfig {
                dropout: 0.0,
                ..FcConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_on_separable_toy() {
        let (ds, set) = toy();
        let trained = train(&ds, &set, &toy_config(1.0, 10)).unwrap();
        let losses: Vec<f64> = trained.history.epochs.iter().map(|r| r.loss).collect();
        assert_eq!(losses.len(), 10);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let (ds, set) = toy();
        let mut config = toy_config(0.9, 5);
        config.fc.dropout = 0.5;
        let a = train(&ds, &set, &config).unwrap();
        let b = train(&ds, &set, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.params(), b.model.params());
    }

    #[test]
    fn regularizer_lowers_subgraph_entropy() {
        let (ds, set) = toy();
        let with = train(&ds, &set, &toy_config(0.5, 30)).unwrap();
        let without = train(&ds, &set, &toy_config(1.0, 30)).unwrap();
        let a = with.model.mean_subgraph_entropy().unwrap();
        let b = without.model.mean_subgraph_entropy().unwrap();
        assert!(a <= b, "{a} > {b}");
    }

    #[test]
    fn rejects_bad_input() {
        let (ds, set) = toy();
        assert!(train(&ds, &set, &toy_config(1.5, 1)).is_err());
        assert!(train(
            &ds,
            &SubgraphSet::new(vec![]).unwrap_or(set.clone()),
            &toy_config(0.9, 0)
        )
        .is_err());
        let unsplit = Dataset::new("toy", ds.graphs().to_vec(), 2).unwrap();
        assert!(train(&unsplit, &set, &toy_config(0.9, 1)).is_err());
    }
}
