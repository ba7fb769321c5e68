use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fc::{self, FcStack, Mode};
use super::kernel::KernelConfig;
use super::loss::check_lambda;
use crate::error::{Error, Result};
use crate::gin::{self, GinEncoder, GraphBatch};
use crate::graph::Graph;
use crate::numerics::{kernel_matrix, ParameterStore, Tape, Tensor, Var};

/// Architecture of the whole classifier: encoder, dependency kernel and FC head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder: GinEncoder,
    pub kernel: KernelConfig,
    pub fc: FcStack,
}

/// Tape handles of every parameter, keyed by parameter name.
pub(crate) struct Bound {
    gin: Vec<gin::GinLayerVars>,
    fc: Vec<fc::FcLayerVars>,
    named: Vec<(String, Var)>,
}

pub(crate) struct Forward {
    pub graph_logits: Var,
    pub subgraph_logits: Var,
}

impl ModelSpec {
    pub fn new(encoder: GinEncoder, kernel: KernelConfig, fc: FcStack) -> Result<Self> {
        kernel.validate()?;
        Ok(ModelSpec {
            encoder,
            kernel,
            fc,
        })
    }

    pub fn num_subgraphs(&self) -> usize {
        self.fc.num_subgraphs
    }

    pub fn num_classes(&self) -> usize {
        self.fc.num_classes
    }

    pub fn init_params(&self, seed: u64) -> ParameterStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        self.encoder.init(&mut store, &mut rng);
        self.fc.init(&mut store, &mut rng);
        store
    }

    pub(crate) fn bind(&self, tape: &mut Tape, store: &ParameterStore) -> Result<Bound> {
        let gin_vars = self.encoder.bind(tape, store)?;
        let fc_vars = self.fc.bind(tape, store)?;
        let mut named = Vec::new();
        for (l, v) in gin_vars.iter().enumerate() {
            for (part, var) in [
                ("w1", v.w1),
                ("b1", v.b1),
                ("w2", v.w2),
                ("b2", v.b2),
                ("eps", v.eps),
            ] {
                named.push((gin::param_name(l, part), var));
            }
        }
        for (l, v) in fc_vars.iter().enumerate() {
            named.push((fc::param_name(l, "weight"), v.weight));
            named.push((fc::param_name(l, "bias"), v.bias));
        }
        if named.len() != store.len() {
            return Err(Error::invalid(format!(
                "parameter store has {} tensors, model uses {}",
                store.len(),
                named.len()
            )));
        }
        Ok(Bound {
            gin: gin_vars,
            fc: fc_vars,
            named,
        })
    }

    /// Logits of `graphs` and of the subgraphs themselves, computed from one
    /// shared GIN pass over their disjoint union.
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        graphs: &[&Graph],
        subgraphs: &[&Graph],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Forward> {
        if subgraphs.len() != self.num_subgraphs() {
            return Err(Error::invalid(format!(
                "model expects {} subgraphs, got {}",
                self.num_subgraphs(),
                subgraphs.len()
            )));
        }
        let (n, s) = (graphs.len(), subgraphs.len());
        let batch = GraphBatch::new(graphs.iter().chain(subgraphs).copied())?;
        let z = self.encoder.graph_embeddings_on(tape, &bound.gin, &batch)?;
        let zs = tape.slice_rows(z, n, n + s)?;
        // dependency rows for graphs and subgraphs alike: ψ(z, z_sg_j)
        let deps = tape.kernel(z, zs, self.kernel.pairwise())?;
        let logits = self.fc.forward_on(tape, &bound.fc, deps, mode, rng)?;
        Ok(Forward {
            graph_logits: tape.slice_rows(logits, 0, n)?,
            subgraph_logits: tape.slice_rows(logits, n, n + s)?,
        })
    }

    /// Objective `λ·CE + (1-λ)·entropy` on one batch and its gradient with
    /// respect to every parameter.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        graphs: &[&Graph],
        subgraphs: &[&Graph],
        lambda: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(LossParts, BTreeMap<String, Tensor>)> {
        check_lambda(lambda)?;
        let labels = labels_of(graphs)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, store)?;
        let out = self.forward(&mut tape, &bound, graphs, subgraphs, mode, rng)?;
        let ce = tape.cross_entropy(out.graph_logits, &labels)?;
        let reg = tape.entropy(out.subgraph_logits)?;
        let total = tape.combine(ce, lambda, reg, 1.0 - lambda)?;
        let mut grads = tape.backward_scalar(total)?;
        let parts = LossParts {
            total: tape.value(total).values()[0],
            classification: tape.value(ce).values()[0],
            regularization: tape.value(reg).values()[0],
        };
        let named = bound
            .named
            .iter()
            .map(|(name, var)| {
                let (r, c) = tape.value(*var).shape();
                (name.clone(), grads.take_or_zeros(*var, r, c))
            })
            .collect();
        Ok((parts, named))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub classification: f64,
    pub regularization: f64,
}

pub(crate) fn labels_of(graphs: &[&Graph]) -> Result<Vec<usize>> {
    graphs
        .iter()
        .map(|g| {
            g.label()
                .ok_or_else(|| Error::invalid(format!("graph {} has no label", g.id())))
        })
        .collect()
}

/// Trained classifier together with the subgraph structures it depends on.
#[derive(Debug, Clone)]
pub struct OracleModel {
    spec: ModelSpec,
    params: ParameterStore,
    subgraphs: Vec<Graph>,
}

impl OracleModel {
    pub fn new(spec: ModelSpec, params: ParameterStore, subgraphs: Vec<Graph>) -> Result<Self> {
        if subgraphs.len() != spec.num_subgraphs() {
            return Err(Error::invalid(format!(
                "model expects {} subgraphs, got {}",
                spec.num_subgraphs(),
                subgraphs.len()
            )));
        }
        let mut tape = Tape::new();
        spec.bind(&mut tape, &params)?;
        Ok(OracleModel {
            spec,
            params,
            subgraphs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn subgraph_structures(&self) -> &[Graph] {
        &self.subgraphs
    }

    fn subgraph_refs(&self) -> Vec<&Graph> {
        self.subgraphs.iter().collect()
    }

    pub fn graph_embeddings(&self, graphs: &[&Graph]) -> Result<Tensor> {
        self.spec.encoder.embed_graphs(&self.params, graphs)
    }

    pub fn subgraph_embeddings(&self) -> Result<Tensor> {
        self.spec
            .encoder
            .embed_graphs(&self.params, &self.subgraph_refs())
    }

    /// Dependency embeddings `z̃_G`, one row per graph.
    pub fn dependency_embeddings(&self, graphs: &[&Graph]) -> Result<Tensor> {
        let zg = self.graph_embeddings(graphs)?;
        let zs = self.subgraph_embeddings()?;
        Ok(kernel_matrix(&zg, &zs, self.spec.kernel.pairwise()))
    }

    /// Evaluation-mode logits for precomputed dependency embeddings.
    pub fn logits_from_dependencies(&self, deps: &Tensor) -> Result<Tensor> {
        self.spec.fc.logits(&self.params, deps)
    }

    pub fn logits(&self, graphs: &[&Graph]) -> Result<Tensor> {
        self.logits_from_dependencies(&self.dependency_embeddings(graphs)?)
    }

    pub fn predict_proba(&self, graphs: &[&Graph]) -> Result<Tensor> {
        Ok(self.logits(graphs)?.softmax_rows())
    }

    pub fn predict(&self, graphs: &[&Graph]) -> Result<Vec<usize>> {
        Ok(self.logits(graphs)?.argmax_rows())
    }

    /// Fraction of correctly classified graphs and their mean cross-entropy.
    pub fn evaluate(&self, graphs: &[&Graph]) -> Result<(f64, f64)> {
        if graphs.is_empty() {
            return Err(Error::invalid("cannot evaluate on an empty graph list"));
        }
        let labels = labels_of(graphs)?;
        let logits = self.logits(graphs)?;
        let correct = logits
            .argmax_rows()
            .iter()
            .zip(&labels)
            .filter(|(p, y)| p == y)
            .count();
        let loss = super::loss::classification_loss(&logits, &labels)?;
        Ok((correct as f64 / graphs.len() as f64, loss))
    }

    pub fn accuracy(&self, graphs: &[&Graph]) -> Result<f64> {
        Ok(self.evaluate(graphs)?.0)
    }

    /// Logits the FC head assigns to each subgraph's own dependency row.
    pub fn subgraph_logits(&self) -> Result<Tensor> {
        let zs = self.subgraph_embeddings()?;
        let deps = kernel_matrix(&zs, &zs, self.spec.kernel.pairwise());
        self.logits_from_dependencies(&deps)
    }

    /// Mean Shannon entropy (nats) of the per-subgraph class distributions.
    pub fn mean_subgraph_entropy(&self) -> Result<f64> {
        let logp = self.subgraph_logits()?.log_softmax_rows();
        let total: f64 = logp.values().iter().map(|&l| -l.exp() * l).sum();
        Ok(total / logp.rows() as f64)
    }

    /// Last-layer weights `W^m`, `|C| x |SG|`.
    pub fn class_dependency_matrix(&self) -> Result<Tensor> {
        self.spec.fc.last_weight(&self.params).cloned()
    }
}
