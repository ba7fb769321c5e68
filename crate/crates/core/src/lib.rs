//! Class-level self-explaining graph classification.
//!
//! Graphs are embedded with a GIN encoder and compared against a bank of
//! subgraphs mined by biased random walks. Each graph becomes a vector of
//! kernel similarities to those subgraphs, and a small fully connected head
//! classifies that vector. The head's last weight matrix then reads directly
//! as class-to-subgraph importance.

pub mod cli;
pub mod data;
pub mod error;
pub mod explainer;
pub mod extract;
pub mod fidelity;
pub mod gin;
pub mod graph;
pub mod io;
pub mod numerics;

pub use data::{Dataset, Splits};
pub use error::{Error, Result};
pub use explainer::{train, OracleModel, TrainConfig, TrainedModel};
pub use extract::{extract_subgraphs, Subgraph, SubgraphSet, WalkConfig};
pub use graph::{Graph, NodeSet};
