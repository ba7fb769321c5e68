//! Self-explaining classifier head: graph-subgraph dependency kernels, the FC
//! stack over dependency embeddings, the entropy-regularised objective,
//! training, and class-level explanations.

mod checkpoint;
mod explain;
mod fc;
mod kernel;
mod loss;
mod model;
mod train;

pub use checkpoint::{ModelCheckpoint, MODEL_SCHEMA_VERSION};
pub use explain::{
    class_explanations, embeddings_csv, explanations_csv, heatmap, Heatmap, RankedSubgraph,
};
pub use fc::{FcConfig, FcLayerVars, FcStack, HiddenInit, Mode};
pub use kernel::{
    dependency_embedding, kernel_dependency, DependencyEmbedding, KernelConfig, KernelKind,
};
pub use loss::{classification_loss, entropy_regularizer, total_objective};
pub use model::{LossParts, ModelSpec, OracleModel};
pub use train::{build_spec, train, EpochRecord, TrainConfig, TrainedModel, TrainingHistory};
