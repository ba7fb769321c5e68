//! Undirected simple graphs with node features, plus the node-set keys used
//! to identify induced subgraphs.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Undirected simple graph with an `n x k` feature matrix and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    id: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Tensor,
    label: Option<usize>,
}

impl Graph {
    /// Builds a graph from unordered node pairs. Repeated pairs (in either
    /// direction) collapse into one edge; self-loops are rejected.
    pub fn new(
        id: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Tensor,
        label: Option<usize>,
    ) -> Result<Self> {
        let n = features.rows();
        let mut norm = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("graph {id}: self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "graph {id}: edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Graph {
            id,
            edges: norm,
            neighbors,
            features,
            label,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn adjacency_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors
            .get(a)
            .is_some_and(|l| l.binary_search(&b).is_ok())
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// Per-node degree.
    pub fn degree_centrality(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Dense `n x n` 0/1 adjacency matrix.
    pub fn dense_adjacency(&self) -> Tensor {
        let n = self.num_nodes();
        let mut a = Tensor::zeros(n, n);
        for &(u, v) in &self.edges {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        a
    }

    /// True iff the graph has exactly one connected component.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    /// Subgraph induced by `nodes`, relabelled `0..len` in the node set's
    /// sorted order, with feature rows copied and no label.
    pub fn induced_subgraph(&self, nodes: &NodeSet) -> Result<Graph> {
        if nodes.is_empty() {
            return Err(Error::invalid("induced subgraph of an empty node set"));
        }
        if let Some(&bad) = nodes.nodes().iter().find(|&&v| v >= self.num_nodes()) {
            return Err(Error::invalid(format!(
                "node {bad} out of range for graph {} with {} nodes",
                self.id,
                self.num_nodes()
            )));
        }
        let kept = nodes.nodes();
        let local = |v: usize| kept.binary_search(&v).ok();
        let mut edges = Vec::new();
        for (i, &v) in kept.iter().enumerate() {
            for &u in &self.neighbors[v] {
                if u > v {
                    if let Some(j) = local(u) {
                        edges.push((i, j));
                    }
                }
            }
        }
        let k = self.feature_dim();
        let mut values = Vec::with_capacity(kept.len() * k);
        for &v in kept {
            values.extend_from_slice(self.features.row(v));
        }
        let features = Tensor::from_vec(kept.len(), k, values)?;
        Graph::new(self.id, edges, features, None)
    }
}

/// Sorted, duplicate-free node indices of one parent graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet {
    parent_graph: usize,
    nodes: Vec<usize>,
}

impl NodeSet {
    /// Canonicalises `nodes` (sort + dedup) for `parent_graph`.
    pub fn new(parent_graph: usize, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut nodes: Vec<usize> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        NodeSet {
            parent_graph,
            nodes,
        }
    }

    /// Like [`NodeSet::new`] but checks every index against `graph`.
    pub fn for_graph(graph: &Graph, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set = NodeSet::new(graph.id(), nodes);
        if let Some(&bad) = set.nodes.iter().find(|&&v| v >= graph.num_nodes()) {
            return Err(Error::invalid(format!(
                "node {bad} out of range for graph {}",
                graph.id()
            )));
        }
        Ok(set)
    }

    pub fn parent_graph(&self) -> usize {
        self.parent_graph
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
