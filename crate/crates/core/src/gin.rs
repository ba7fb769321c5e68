//! GIN encoder: `h_v ← MLP((1 + ε)·h_v + Σ_{u ∈ N(v)} h_u)` per layer, ReLU
//! between layers, then sum or mean pooling into one vector per graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::SubgraphSet;
use crate::graph::Graph;
use crate::numerics::{Activation, ParameterStore, Tape, Tensor, Var};

/// Readout from node embeddings to a graph embedding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Sum,
    /// Sum divided by the node count, so graphs and the much smaller
    /// subgraphs land on a comparable scale.
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinConfig {
    /// Output width of each GIN layer; its length is the layer count.
    pub hidden_dims: Vec<usize>,
    /// Initial value of every layer's learnable ε.
    pub epsilon_init: f64,
    /// Multiplier on the Glorot-uniform bound used for perceptron weights.
    pub init_gain: f64,
    pub pooling: Pooling,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig {
            hidden_dims: vec![32, 32],
            epsilon_init: 0.0,
            init_gain: 0.3,
            pooling: Pooling::Mean,
        }
    }
}

impl GinConfig {
    pub fn with_layers(num_layers: usize, width: usize) -> Self {
        GinConfig {
            hidden_dims: vec![width; num_layers],
            ..Self::default()
        }
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len()
    }

    /// Width `d` of the pooled embedding.
    pub fn output_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::invalid(format!(
                "GIN needs at least one layer of positive width, got {:?}",
                self.hidden_dims
            )));
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return Err(Error::invalid("GIN init gain must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn param_name(layer: usize, part: &str) -> String {
    format!("gin.{layer}.{part}")
}

/// Glorot-uniform `out x in` matrix scaled by `gain`.
pub(crate) fn glorot<R: Rng + ?Sized>(out: usize, inp: usize, gain: f64, rng: &mut R) -> Tensor {
    let bound = gain * (6.0 / (inp + out) as f64).sqrt();
    let values = (0..out * inp)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor::from_vec(out, inp, values).expect("sized above")
}

/// Bias row drawn from `U(±gain/sqrt(inp))`.
pub(crate) fn bias_init<R: Rng + ?Sized>(out: usize, inp: usize, gain: f64, rng: &mut R) -> Tensor {
    let bound = gain / (inp as f64).sqrt();
    if bound == 0.0 {
        return Tensor::zeros(1, out);
    }
    Tensor::row_vector((0..out).map(|_| rng.gen_range(-bound..=bound)).collect())
}

/// Disjoint union of several graphs, laid out for one batched GIN pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    features: Tensor,
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> Result<Self> {
        let mut values = Vec::new();
        let mut neighbors = Vec::new();
        let mut offsets = vec![0];
        let mut dim = None;
        for g in graphs {
            if g.num_nodes() == 0 {
                return Err(Error::invalid(format!("graph {} has no nodes", g.id())));
            }
            match dim {
                None => dim = Some(g.feature_dim()),
                Some(k) if k != g.feature_dim() => {
                    return Err(Error::invalid(format!(
                        "feature width {} differs from {k}",
                        g.feature_dim()
                    )))
                }
                _ => {}
            }
            let base = *offsets.last().expect("non-empty");
            values.extend_from_slice(g.features().values());
            neighbors.extend(
                g.adjacency_lists()
                    .iter()
                    .map(|l| l.iter().map(|&u| u + base).collect::<Vec<_>>()),
            );
            offsets.push(base + g.num_nodes());
        }
        let k = dim.unwrap_or(0);
        let n = *offsets.last().expect("non-empty");
        Ok(GraphBatch {
            features: Tensor::from_vec(n, k, values)?,
            neighbors,
            offsets,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct GinLayerVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub eps: Var,
}

/// GIN encoder shape: input width plus layer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinEncoder {
    pub config: GinConfig,
    pub input_dim: usize,
}

impl GinEncoder {
    pub fn new(config: GinConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::invalid("GIN input width must be positive"));
        }
        Ok(GinEncoder { config, input_dim })
    }

    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ins = std::iter::once(self.input_dim).chain(self.config.hidden_dims.iter().copied());
        ins.zip(self.config.hidden_dims.iter().copied())
    }

    /// Inserts freshly initialised parameters into `store`.
    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParameterStore, rng: &mut R) {
        let gain = self.config.init_gain;
        for (l, (din, dout)) in self.layer_dims().enumerate() {
            store.insert(param_name(l, "w1"), glorot(dout, din, gain, rng));
            store.insert(param_name(l, "b1"), bias_init(dout, din, gain, rng));
            store.insert(param_name(l, "w2"), glorot(dout, dout, gain, rng));
            store.insert(param_name(l, "b2"), bias_init(dout, dout, gain, rng));
            store.insert(
                param_name(l, "eps"),
                Tensor::scalar(self.config.epsilon_init),
            );
        }
    }

    /// Records the parameters as tape leaves, checking their shapes.
    pub fn bind(&self, tape: &mut Tape, store: &ParameterStore) -> Result<Vec<GinLayerVars>> {
        self.layer_dims()
            .enumerate()
            .map(|(l, (din, dout))| {
                let mut leaf = |part: &str, shape: (usize, usize)| -> Result<Var> {
                    let name = param_name(l, part);
                    let t = store.expect(&name)?;
                    if t.shape() != shape {
                        return Err(Error::shape(
                            "gin",
                            format!("{name} is {:?}, expected {shape:?}", t.shape()),
                        ));
                    }
                    Ok(tape.leaf(t.clone()))
                };
                Ok(GinLayerVars {
                    w1: leaf("w1", (dout, din))?,
                    b1: leaf("b1", (1, dout))?,
                    w2: leaf("w2", (dout, dout))?,
                    b2: leaf("b2", (1, dout))?,
                    eps: leaf("eps", (1, 1))?,
                })
            })
            .collect()
    }

    /// Node embeddings for every node of the batch.
    pub fn node_embeddings_on(
        &self,
        tape: &mut Tape,
        layers: &[GinLayerVars],
        batch: &GraphBatch,
    ) -> Result<Var> {
        if batch.feature_dim() != self.input_dim {
            return Err(Error::invalid(format!(
                "graph features have width {}, encoder expects {}",
                batch.feature_dim(),
                self.input_dim
            )));
        }
        let mut h = tape.leaf(batch.features.clone());
        for (l, p) in layers.iter().enumerate() {
            let agg = tape.gin_aggregate(h, p.eps, batch.neighbors.clone())?;
            let x = tape.matmul_t(agg, p.w1)?;
            let x = tape.add_row(x, p.b1)?;
            let x = tape.activate(x, Activation::Relu)?;
            let x = tape.matmul_t(x, p.w2)?;
            h = tape.add_row(x, p.b2)?;
            if l + 1 < layers.len() {
                h = tape.activate(h, Activation::Relu)?;
            }
        }
        Ok(h)
    }

    /// Pooled embedding per graph of the batch, one row each.
    pub fn graph_embeddings_on(
        &self,
        tape: &mut Tape,
        layers: &[GinLayerVars],
        batch: &GraphBatch,
    ) -> Result<Var> {
        let h = self.node_embeddings_on(tape, layers, batch)?;
        let z = tape.segment_sum(h, batch.offsets.clone())?;
        match self.config.pooling {
            Pooling::Sum => Ok(z),
            Pooling::Mean => {
                let mut scale = Tensor::zeros(batch.num_graphs(), tape.value(z).cols());
                for g in 0..batch.num_graphs() {
                    let n = batch.offsets[g + 1] - batch.offsets[g];
                    scale.row_mut(g).fill(1.0 / n as f64);
                }
                tape.mask(z, scale)
            }
        }
    }

    /// Node embedding matrix `H` of one graph.
    pub fn gin_forward(&self, store: &ParameterStore, graph: &Graph) -> Result<Tensor> {
        let mut tape = Tape::new();
        let layers = self.bind(&mut tape, store)?;
        let batch = GraphBatch::new([graph])?;
        let h = self.node_embeddings_on(&mut tape, &layers, &batch)?;
        Ok(tape.value(h).clone())
    }

    /// Pooled embeddings for a list of graphs, one row per graph.
    pub fn embed_graphs(&self, store: &ParameterStore, graphs: &[&Graph]) -> Result<Tensor> {
        if graphs.is_empty() {
            return Ok(Tensor::zeros(0, self.config.output_dim()));
        }
        let mut tape = Tape::new();
        let layers = self.bind(&mut tape, store)?;
        let batch = GraphBatch::new(graphs.iter().copied())?;
        let z = self.graph_embeddings_on(&mut tape, &layers, &batch)?;
        Ok(tape.value(z).clone())
    }

    /// Embeddings of `graphs` and of every subgraph, under the same parameters.
    pub fn embed_all(
        &self,
        store: &ParameterStore,
        graphs: &[&Graph],
        subgraphs: &SubgraphSet,
    ) -> Result<(Tensor, Tensor)> {
        Ok((
            self.embed_graphs(store, graphs)?,
            self.embed_graphs(store, &subgraphs.structures())?,
        ))
    }
}

/// Column sums (or means) of a node embedding matrix.
pub fn graph_embedding(h: &Tensor, pooling: Pooling) -> Result<Vec<f64>> {
    if h.rows() == 0 {
        return Err(Error::invalid("cannot pool an empty node embedding matrix"));
    }
    let mut z = vec![0.0; h.cols()];
    for r in 0..h.rows() {
        for (acc, v) in z.iter_mut().zip(h.row(r)) {
            *acc += v;
        }
    }
    if pooling == Pooling::Mean {
        let n = h.rows() as f64;
        z.iter_mut().for_each(|v| *v /= n);
    }
    Ok(z)
}
