//! Fidelity of class-level explanations: mask the critical subgraph
//! dimensions of each dependency embedding and measure how much the
//! true-class probability moves.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::OracleModel;
use crate::graph::Graph;
use crate::numerics::Tensor;

pub const DEFAULT_SPARSITY_LEVELS: [f64; 6] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75];

/// Fraction of subgraphs left out of the explanation, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SparsityLevel(f64);

impl SparsityLevel {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(SparsityLevel(value))
        } else {
            Err(Error::invalid(format!("sparsity {value} not in [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `round((1 - s)·total)`: the number of critical subgraphs kept.
    pub fn critical_count(self, total: usize) -> usize {
        ((1.0 - self.0) * total as f64).round() as usize
    }
}

/// `1 - |SG*| / |SG|`.
pub fn sparsity_of(num_critical: usize, total: usize) -> Result<SparsityLevel> {
    if total == 0 || num_critical > total {
        return Err(Error::invalid(format!(
            "{num_critical} critical subgraphs out of {total}"
        )));
    }
    SparsityLevel::new(1.0 - num_critical as f64 / total as f64)
}

/// Critical subgraphs at the given sparsity: the columns of `W^m` with the
/// largest spread `max_c W[c][j] - min_c W[c][j]`, lower index first on ties.
/// Returned in ascending index order.
pub fn select_critical(weights: &Tensor, sparsity: SparsityLevel) -> Result<Vec<usize>> {
    let (c, s) = weights.shape();
    if c == 0 || s == 0 {
        return Err(Error::invalid("empty class-subgraph weight matrix"));
    }
    let spread: Vec<f64> = (0..s)
        .map(|j| {
            let col = (0..c).map(|r| weights.get(r, j));
            let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
            let min = col.fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| spread[b].total_cmp(&spread[a]).then(a.cmp(&b)));
    order.truncate(sparsity.critical_count(s));
    order.sort_unstable();
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Zero the critical dimensions.
    Remove,
    /// Zero everything except the critical dimensions.
    Retain,
}

pub fn mask_embedding(z: &[f64], critical: &[usize], mode: MaskMode) -> Result<Vec<f64>> {
    if let Some(&bad) = critical.iter().find(|&&j| j >= z.len()) {
        return Err(Error::invalid(format!(
            "critical index {bad} out of range for width {}",
            z.len()
        )));
    }
    let mut is_critical = vec![false; z.len()];
    for &j in critical {
        is_critical[j] = true;
    }
    Ok(z.iter()
        .zip(&is_critical)
        .map(|(&v, &crit)| match (mode, crit) {
            (MaskMode::Remove, true) | (MaskMode::Retain, false) => 0.0,
            _ => v,
        })
        .collect())
}

fn mask_rows(z: &Tensor, critical: &[usize], mode: MaskMode) -> Result<Tensor> {
    let mut out = Tensor::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        out.row_mut(r)
            .copy_from_slice(&mask_embedding(z.row(r), critical, mode)?);
    }
    Ok(out)
}

/// Mean of `original[i] - masked[i]` over graphs.
pub fn mean_probability_drop(original: &[f64], masked: &[f64]) -> Result<f64> {
    if original.is_empty() || original.len() != masked.len() {
        return Err(Error::invalid(format!(
            "{} original and {} masked probabilities",
            original.len(),
            masked.len()
        )));
    }
    let total: f64 = original.iter().zip(masked).map(|(a, b)| a - b).sum();
    Ok(total / original.len() as f64)
}

pub fn fidelity_delta(plus: f64, minus: f64) -> f64 {
    plus - minus
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub sparsity: f64,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    pub fidelity_delta: f64,
    pub num_critical: usize,
}

/// Evaluates fidelity of a trained model on a fixed graph list, reusing the
/// dependency embeddings across sparsity levels.
pub struct FidelityEvaluator<'a> {
    model: &'a OracleModel,
    labels: Vec<usize>,
    deps: Tensor,
    original: Vec<f64>,
    weights: Tensor,
}

impl<'a> FidelityEvaluator<'a> {
    pub fn new(model: &'a OracleModel, graphs: &[&Graph]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::invalid("fidelity needs at least one graph"));
        }
        let labels: Vec<usize> = graphs
            .iter()
            .map(|g| {
                g.label()
                    .ok_or_else(|| Error::invalid(format!("graph {} has no label", g.id())))
            })
            .collect::<Result<_>>()?;
        let deps = model.dependency_embeddings(graphs)?;
        let original = true_class_probs(model, &deps, &labels)?;
        let weights = model.class_dependency_matrix()?;
        Ok(FidelityEvaluator {
            model,
            labels,
            deps,
            original,
            weights,
        })
    }

    /// Mean true-class probability drop when masking `critical` with `mode`.
    pub fn masked_drop(&self, critical: &[usize], mode: MaskMode) -> Result<f64> {
        let masked = mask_rows(&self.deps, critical, mode)?;
        let probs = true_class_probs(self.model, &masked, &self.labels)?;
        mean_probability_drop(&self.original, &probs)
    }

    pub fn fidelity_plus(&self, sparsity: SparsityLevel) -> Result<f64> {
        self.masked_drop(&select_critical(&self.weights, sparsity)?, MaskMode::Remove)
    }

    pub fn fidelity_minus(&self, sparsity: SparsityLevel) -> Result<f64> {
        self.masked_drop(&select_critical(&self.weights, sparsity)?, MaskMode::Retain)
    }

    pub fn evaluate(&self, sparsity: SparsityLevel) -> Result<FidelityResult> {
        let critical = select_critical(&self.weights, sparsity)?;
        let plus = self.masked_drop(&critical, MaskMode::Remove)?;
        let minus = self.masked_drop(&critical, MaskMode::Retain)?;
        Ok(FidelityResult {
            sparsity: sparsity.value(),
            fidelity_plus: plus,
            fidelity_minus: minus,
            fidelity_delta: fidelity_delta(plus, minus),
            num_critical: critical.len(),
        })
    }

    pub fn sweep(&self, levels: &[f64]) -> Result<Vec<FidelityResult>> {
        levels
            .iter()
            .map(|&s| self.evaluate(SparsityLevel::new(s)?))
            .collect()
    }
}

fn true_class_probs(model: &OracleModel, deps: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
    let p = model.logits_from_dependencies(deps)?.softmax_rows();
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| p.get(i, y))
        .collect())
}

/// Fidelity at each sparsity level over `graphs` (normally the test split).
pub fn evaluate_sweep(
    model: &OracleModel,
    graphs: &[&Graph],
    levels: &[f64],
) -> Result<Vec<FidelityResult>> {
    FidelityEvaluator::new(model, graphs)?.sweep(levels)
}

/// CSV with one row per level; fidelity values optionally scaled by 100.
pub fn fidelity_csv(results: &[FidelityResult], percent: bool) -> String {
    let k = if percent { 100.0 } else { 1.0 };
    let mut out =
        String::from("sparsity,fidelity_plus,fidelity_minus,fidelity_delta,num_critical\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sparsity,
            r.fidelity_plus * k,
            r.fidelity_minus * k,
            r.fidelity_delta * k,
            r.num_critical
        );
    }
    out
}

pub fn write_fidelity_csv(path: &Path, results: &[FidelityResult], percent: bool) -> Result<()> {
    crate::io::write_text(path, &fidelity_csv(results, percent))
}
