//! Barabási-Albert style generators: plain growth, BA-2Motifs (house vs.
//! 5-cycle motif) and BA-LRP (degree vs. inverse-degree attachment).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Tensor;

pub const BA2MOTIFS_FEATURE_DIM: usize = 10;
pub const BA2MOTIFS_FEATURE_VALUE: f64 = 0.1;
const MOTIF_NODES: usize = 5;

/// Attachment rule used when a new node picks its single neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    /// `p(v) ∝ deg(v)`
    Preferential,
    /// `p(v) ∝ 1 / deg(v)`
    InverseDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Ba2Motifs,
    Balrp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: DatasetKind,
    pub count: usize,
    pub base_nodes: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(kind: DatasetKind, count: usize, seed: u64) -> Self {
        GeneratorConfig {
            kind,
            count,
            base_nodes: 20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || !self.count.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "graph count {} must be positive and even",
                self.count
            )));
        }
        if self.base_nodes < 2 {
            return Err(Error::invalid(format!(
                "base_nodes {} must be at least 2",
                self.base_nodes
            )));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.kind {
            DatasetKind::Ba2Motifs => generate_ba2motifs(self),
            DatasetKind::Balrp => generate_balrp(self),
        }
    }
}

/// Grows an `n`-node tree from a single edge, each new node attaching once.
/// Returns the edge list.
pub fn grow_graph<R: Rng + ?Sized>(
    n: usize,
    rule: Attachment,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "BA graph needs at least 2 nodes, got {n}"
        )));
    }
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    edges.push((0, 1));
    degree[0] = 1;
    degree[1] = 1;
    for v in 2..n {
        let weight = |d: usize| match rule {
            Attachment::Preferential => d as f64,
            Attachment::InverseDegree => 1.0 / d as f64,
        };
        let total: f64 = degree[..v].iter().map(|&d| weight(d)).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut target = v - 1;
        for (u, &d) in degree[..v].iter().enumerate() {
            x -= weight(d);
            if x < 0.0 {
                target = u;
                break;
            }
        }
        edges.push((target, v));
        degree[target] += 1;
        degree[v] = 1;
    }
    Ok(edges)
}

/// Preferential-attachment graph on `n` nodes with scalar unit features.
pub fn generate_ba(n: usize, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = grow_graph(n, Attachment::Preferential, &mut rng)?;
    Graph::new(0, edges, Tensor::filled(n, 1, 1.0), None)
}

fn cycle_motif(offset: usize) -> Vec<(usize, usize)> {
    (0..MOTIF_NODES)
        .map(|i| (offset + i, offset + (i + 1) % MOTIF_NODES))
        .collect()
}

fn house_motif(offset: usize) -> Vec<(usize, usize)> {
    let [a, b, c, d, e] = [0, 1, 2, 3, 4].map(|i| offset + i);
    vec![(a, b), (b, c), (c, d), (d, a), (a, e), (b, e)]
}

/// BA base graphs carrying a 5-cycle (label 0) or a house (label 1) on nodes
/// `base_nodes..base_nodes+5`, joined to the base by one bridge edge.
pub fn generate_ba2motifs(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    if config.kind != DatasetKind::Ba2Motifs {
        return Err(Error::invalid("generator config is not for BA-2Motifs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base = config.base_nodes;
    let n = base + MOTIF_NODES;
    let mut graphs = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let label = usize::from(i >= config.count / 2);
        let mut edges = grow_graph(base, Attachment::Preferential, &mut rng)?;
        edges.extend(if label == 0 {
            cycle_motif(base)
        } else {
            house_motif(base)
        });
        let anchor = rng.gen_range(0..base);
        let motif_end = base + rng.gen_range(0..MOTIF_NODES);
        edges.push((anchor, motif_end));
        let features = Tensor::filled(n, BA2MOTIFS_FEATURE_DIM, BA2MOTIFS_FEATURE_VALUE);
        graphs.push(Graph::new(0, edges, features, Some(label))?);
    }
    graphs.shuffle(&mut rng);
    Dataset::new("BA-2Motifs", graphs, 2)
}

/// BA-LRP: label 0 grows by degree, label 1 by inverse degree.
pub fn generate_balrp(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    if config.kind != DatasetKind::Balrp {
        return Err(Error::invalid("generator config is not for BA-LRP"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.base_nodes;
    let mut graphs = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let label = usize::from(i >= config.count / 2);
        let rule = if label == 0 {
            Attachment::Preferential
        } else {
            Attachment::InverseDegree
        };
        let edges = grow_graph(n, rule, &mut rng)?;
        graphs.push(Graph::new(
            0,
            edges,
            Tensor::filled(n, 1, 1.0),
            Some(label),
        )?);
    }
    graphs.shuffle(&mut rng);
    Dataset::new("BA-LRP", graphs, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeSet;

    #[test]
    fn ba_sizes_and_determinism() {
        let g = generate_ba(2, 0).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        let g = generate_ba(20, 5).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (20, 19));
        assert!(g.is_connected());
        assert_eq!(generate_ba(20, 5).unwrap(), g);
        assert!(generate_ba(1, 0).is_err());
    }

    fn motif_edges(g: &Graph) -> Vec<(usize, usize)> {
        let sub = g.induced_subgraph(&NodeSet::new(0, 20..25)).unwrap();
        sub.edges().to_vec()
    }

    #[test]
    fn ba2motifs_structure() {
        let d = generate_ba2motifs(&GeneratorConfig::new(DatasetKind::Ba2Motifs, 100, 7)).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.class_counts(), vec![50, 50]);
        assert_eq!(d.feature_dim(), 10);
        for g in d.graphs() {
            assert_eq!(g.num_nodes(), 25);
            assert!(g.is_connected());
            let motif = motif_edges(g);
            match g.label() {
                Some(0) => assert_eq!(motif, vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]),
                Some(1) => {
                    assert_eq!(motif, vec![(0, 1), (0, 3), (0, 4), (1, 2), (1, 4), (2, 3)])
                }
                other => panic!("unexpected label {other:?}"),
            }
        }
    }

    #[test]
    fn balrp_structure_and_degree_contrast() {
        let d = generate_balrp(&GeneratorConfig::new(DatasetKind::Balrp, 200, 7)).unwrap();
        assert_eq!(d.class_counts(), vec![100, 100]);
        let mut max_deg = [0.0f64; 2];
        for g in d.graphs() {
            assert_eq!(g.num_nodes(), 20);
            assert!(g.is_connected());
            let m = *g.degree_centrality().iter().max().unwrap();
            max_deg[g.label().unwrap()] += m as f64 / 100.0;
        }
        assert!(max_deg[0] > max_deg[1], "{max_deg:?}");
        let again = generate_balrp(&GeneratorConfig::new(DatasetKind::Balrp, 200, 7)).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig::new(DatasetKind::Balrp, 3, 0)
            .validate()
            .is_err());
        let mut c = GeneratorConfig::new(DatasetKind::Balrp, 4, 0);
        c.base_nodes = 1;
        assert!(c.validate().is_err());
        assert!(generate_balrp(&GeneratorConfig::new(DatasetKind::Ba2Motifs, 4, 0)).is_err());
    }
}
