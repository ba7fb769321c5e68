//! Pre-extraction of the subgraph set with degree-rooted, second-order
//! (return / in-out biased) random walks.
//!
//! Training graphs are processed in batches. Within a batch every
//! `(graph, node)` pair is ranked by degree, the top `K` pairs become walk
//! roots, and each walk's visited node set is turned into an induced
//! subgraph. Node sets repeated within the same source graph are dropped.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};

pub const SUBGRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Node visits per walk, root included.
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    /// Roots per batch.
    pub top_k: usize,
    /// Graphs per batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 10,
            p: 1.0,
            q: 1.0,
            top_k: 100,
            batch_size: 150,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::invalid(format!(
                "walk length {} < 2",
                self.walk_length
            )));
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::invalid(format!(
                "p = {} and q = {} must be positive",
                self.p, self.q
            )));
        }
        if self.top_k == 0 || self.batch_size == 0 {
            return Err(Error::invalid("top_k and batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Independent stream per walk, derived from `(seed, batch, root rank)`.
fn walk_rng(seed: u64, batch: usize, rank: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((batch as u64) << 32) | rank as u64);
    rng
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Second-order random walk of `walk_length` visits from `root`.
///
/// The first hop is uniform. Afterwards, standing at `v` having arrived
/// from `t`, neighbor `x` has weight `1/p` if `x == t`, `1` if `x` is
/// adjacent to `t`, and `1/q` otherwise. An isolated root yields `[root]`.
pub fn biased_random_walk<R: Rng + ?Sized>(
    graph: &Graph,
    root: usize,
    config: &WalkConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if root >= graph.num_nodes() {
        return Err(Error::invalid(format!(
            "root {root} out of range for {} nodes",
            graph.num_nodes()
        )));
    }
    let mut walk = Vec::with_capacity(config.walk_length);
    walk.push(root);
    if graph.degree(root) == 0 {
        return Ok(walk);
    }
    let first = graph.neighbors(root);
    walk.push(first[rng.gen_range(0..first.len())]);
    let mut weights = Vec::new();
    while walk.len() < config.walk_length {
        let prev = walk[walk.len() - 2];
        let cur = walk[walk.len() - 1];
        let nbrs = graph.neighbors(cur);
        weights.clear();
        weights.extend(nbrs.iter().map(|&x| {
            if x == prev {
                1.0 / config.p
            } else if graph.has_edge(x, prev) {
                1.0
            } else {
                1.0 / config.q
            }
        }));
        walk.push(nbrs[pick_weighted(&weights, rng)]);
    }
    Ok(walk)
}

/// Induced subgraph of one walk's visited nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    node_set: NodeSet,
    structure: Graph,
}

impl Subgraph {
    pub fn new(source: &Graph, node_set: NodeSet) -> Result<Self> {
        if node_set.parent_graph() != source.id() {
            return Err(Error::invalid(format!(
                "node set belongs to graph {}, not {}",
                node_set.parent_graph(),
                source.id()
            )));
        }
        let structure = source.induced_subgraph(&node_set)?;
        Ok(Subgraph {
            node_set,
            structure,
        })
    }

    pub fn source_graph(&self) -> usize {
        self.node_set.parent_graph()
    }

    pub fn node_set(&self) -> &NodeSet {
        &self.node_set
    }

    pub fn structure(&self) -> &Graph {
        &self.structure
    }
}

/// Ordered subgraphs, unique per `(source graph, node set)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubgraphSet {
    subgraphs: Vec<Subgraph>,
}

impl SubgraphSet {
    pub fn new(subgraphs: Vec<Subgraph>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &subgraphs {
            if !seen.insert(s.node_set()) {
                return Err(Error::invalid(format!(
                    "duplicate subgraph {:?} of graph {}",
                    s.node_set().nodes(),
                    s.source_graph()
                )));
            }
        }
        Ok(SubgraphSet { subgraphs })
    }

    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn get(&self, i: usize) -> &Subgraph {
        &self.subgraphs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Subgraph> {
        self.subgraphs.iter()
    }

    pub fn structures(&self) -> Vec<&Graph> {
        self.subgraphs.iter().map(Subgraph::structure).collect()
    }
}

/// Walk roots for one batch: all `(graph, node)` pairs sorted by degree
/// descending, then graph index, then node index; first `top_k` kept.
pub fn batch_roots(dataset: &Dataset, batch: &[usize], top_k: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = batch
        .iter()
        .flat_map(|&g| {
            let graph = dataset.graph(g);
            (0..graph.num_nodes()).map(move |v| (graph.degree(v), g, v))
        })
        .collect();
    pairs.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pairs
        .into_iter()
        .take(top_k)
        .map(|(_, g, v)| (g, v))
        .collect()
}

/// Extracts the subgraph set from the training split.
pub fn extract_subgraphs(dataset: &Dataset, config: &WalkConfig) -> Result<SubgraphSet> {
    config.validate()?;
    let train = &dataset.splits().train;
    if train.is_empty() {
        return Err(Error::invalid("dataset has an empty training split"));
    }
    let mut seen: HashSet<NodeSet> = HashSet::new();
    let mut subgraphs = Vec::new();
    for (b, batch) in train.chunks(config.batch_size).enumerate() {
        for (rank, (g, root)) in batch_roots(dataset, batch, config.top_k)
            .into_iter()
            .enumerate()
        {
            let graph = dataset.graph(g);
            let mut rng = walk_rng(config.seed, b, rank);
            let walk = biased_random_walk(graph, root, config, &mut rng)?;
            let key = NodeSet::new(g, walk);
            if seen.insert(key.clone()) {
                subgraphs.push(Subgraph::new(graph, key)?);
            }
        }
    }
    Ok(SubgraphSet { subgraphs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphRecord {
    pub source_graph: usize,
    pub nodes: Vec<usize>,
}

/// Serialized subgraph set; structures are rebuilt from the dataset on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphFile {
    pub schema_version: u32,
    pub config: WalkConfig,
    /// Hash of the dataset the node sets refer to.
    pub dataset_hash: String,
    pub subgraphs: Vec<SubgraphRecord>,
}

impl SubgraphFile {
    pub fn new(set: &SubgraphSet, config: &WalkConfig, dataset: &Dataset) -> Self {
        SubgraphFile {
            schema_version: SUBGRAPH_SCHEMA_VERSION,
            config: *config,
            dataset_hash: dataset.content_hash(),
            subgraphs: set
                .iter()
                .map(|s| SubgraphRecord {
                    source_graph: s.source_graph(),
                    nodes: s.node_set().nodes().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the subgraph set, refusing a dataset other than the one
    /// the file was extracted from.
    pub fn resolve(&self, dataset: &Dataset) -> Result<SubgraphSet> {
        if self.schema_version != SUBGRAPH_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported subgraph schema version {}",
                self.schema_version
            )));
        }
        if self.dataset_hash != dataset.content_hash() {
            return Err(Error::Stale(
                "subgraph file was extracted from a different dataset".into(),
            ));
        }
        let mut subgraphs = Vec::with_capacity(self.subgraphs.len());
        for rec in &self.subgraphs {
            if rec.source_graph >= dataset.len() {
                return Err(Error::invalid(format!(
                    "subgraph source {} out of range",
                    rec.source_graph
                )));
            }
            let graph = dataset.graph(rec.source_graph);
            let set = NodeSet::for_graph(graph, rec.nodes.iter().copied())?;
            subgraphs.push(Subgraph::new(graph, set)?);
        }
        SubgraphSet::new(subgraphs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}
