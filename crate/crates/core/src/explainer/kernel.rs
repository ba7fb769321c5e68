use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{PairwiseKernel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Rbf,
    InnerProduct,
    Polynomial,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rbf" => Ok(KernelKind::Rbf),
            "inner_product" | "inner" | "linear" => Ok(KernelKind::InnerProduct),
            "polynomial" | "poly" => Ok(KernelKind::Polynomial),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Graph-subgraph dependency function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// RBF bandwidth.
    pub theta: f64,
    pub poly_c: f64,
    pub poly_degree: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::Rbf,
            theta: 1.0,
            poly_c: 1.0,
            poly_degree: 2,
        }
    }
}

impl KernelConfig {
    pub fn rbf(theta: f64) -> Self {
        KernelConfig {
            theta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!(
                "RBF theta {} must be positive",
                self.theta
            )));
        }
        if self.poly_degree == 0 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        Ok(())
    }

    pub fn pairwise(&self) -> PairwiseKernel {
        match self.kind {
            KernelKind::Rbf => PairwiseKernel::Rbf { theta: self.theta },
            KernelKind::InnerProduct => PairwiseKernel::InnerProduct,
            KernelKind::Polynomial => PairwiseKernel::Polynomial {
                c: self.poly_c,
                degree: self.poly_degree,
            },
        }
    }
}

/// Dependency of a graph on a subgraph, `ψ(z_g, z_sg)`.
pub fn kernel_dependency(z_g: &[f64], z_sg: &[f64], config: &KernelConfig) -> Result<f64> {
    if z_g.len() != z_sg.len() {
        return Err(Error::invalid(format!(
            "embedding dims differ: {} vs {}",
            z_g.len(),
            z_sg.len()
        )));
    }
    config.validate()?;
    Ok(config.pairwise().eval(z_g, z_sg))
}

/// A graph's dependencies on every subgraph, in subgraph order.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyEmbedding(pub Vec<f64>);

impl DependencyEmbedding {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `ψ(z_g, z_sg_j)` for every row `j` of `subgraph_embeddings`.
pub fn dependency_embedding(
    z_g: &[f64],
    subgraph_embeddings: &Tensor,
    config: &KernelConfig,
) -> Result<DependencyEmbedding> {
    if subgraph_embeddings.rows() == 0 {
        return Err(Error::invalid("empty subgraph set"));
    }
    (0..subgraph_embeddings.rows())
        .map(|j| kernel_dependency(z_g, subgraph_embeddings.row(j), config))
        .collect::<Result<_>>()
        .map(DependencyEmbedding)
}
