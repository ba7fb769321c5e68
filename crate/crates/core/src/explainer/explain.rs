//! Class-level explanations read off the last FC layer, and their exports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::extract::SubgraphSet;
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedSubgraph {
    pub subgraph: usize,
    pub weight: f64,
}

/// Top `top_n` subgraphs per class by descending weight in `W^m`; equal
/// weights keep the lower subgraph index first. `top_n` larger than the
/// subgraph count is clipped.
pub fn class_explanations(weights: &Tensor, top_n: usize) -> Vec<Vec<RankedSubgraph>> {
    let s = weights.cols();
    if top_n > s {
        log::warn!("top-n {top_n} exceeds the {s} available subgraphs; clipping");
    }
    (0..weights.rows())
        .map(|c| {
            let row = weights.row(c);
            let mut idx: Vec<usize> = (0..s).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx.into_iter()
                .take(top_n.min(s))
                .map(|j| RankedSubgraph {
                    subgraph: j,
                    weight: row[j],
                })
                .collect()
        })
        .collect()
}

fn node_list(nodes: &[usize]) -> String {
    nodes
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// `class,rank,subgraph_id,weight,source_graph,node_set` with 1-based ranks
/// and space-separated node ids.
pub fn explanations_csv(ranked: &[Vec<RankedSubgraph>], subgraphs: &SubgraphSet) -> Result<String> {
    let mut out = String::from("class,rank,subgraph_id,weight,source_graph,node_set\n");
    for (c, list) in ranked.iter().enumerate() {
        for (r, item) in list.iter().enumerate() {
            if item.subgraph >= subgraphs.len() {
                return Err(Error::invalid(format!(
                    "subgraph {} not in a set of {}",
                    item.subgraph,
                    subgraphs.len()
                )));
            }
            let sg = subgraphs.get(item.subgraph);
            let _ = writeln!(
                out,
                "{c},{},{},{},{},{}",
                r + 1,
                item.subgraph,
                item.weight,
                sg.source_graph(),
                node_list(sg.node_set().nodes())
            );
        }
    }
    Ok(out)
}

/// Row-softmaxed `W^m` with its column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub columns: Vec<usize>,
    pub values: Tensor,
}

/// Heatmap of class-subgraph dependencies. With `sort_by_first_class`, columns
/// are ordered by descending class-0 value (stable in subgraph index).
pub fn heatmap(weights: &Tensor, sort_by_first_class: bool) -> Heatmap {
    let soft = weights.softmax_rows();
    let mut columns: Vec<usize> = (0..soft.cols()).collect();
    if sort_by_first_class && soft.rows() > 0 {
        let first = soft.row(0);
        columns.sort_by(|&a, &b| first[b].total_cmp(&first[a]).then(a.cmp(&b)));
    }
    let mut values = Tensor::zeros(soft.rows(), soft.cols());
    for r in 0..soft.rows() {
        for (k, &j) in columns.iter().enumerate() {
            values.set(r, k, soft.get(r, j));
        }
    }
    Heatmap { columns, values }
}

impl Heatmap {
    /// Header `class,sg_<id>...`, one row per class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for j in &self.columns {
            let _ = write!(out, ",sg_{j}");
        }
        out.push('\n');
        for r in 0..self.values.rows() {
            let _ = write!(out, "{r}");
            for v in self.values.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_text(path, &self.to_csv())
    }
}

/// `kind,index,v0..v{d-1}` rows for graph and subgraph embeddings.
pub fn embeddings_csv(graphs: &Tensor, subgraphs: &Tensor) -> Result<String> {
    if graphs.rows() > 0 && subgraphs.rows() > 0 && graphs.cols() != subgraphs.cols() {
        return Err(Error::shape(
            "embeddings_csv",
            format!("widths {} and {}", graphs.cols(), subgraphs.cols()),
        ));
    }
    let d = graphs.cols().max(subgraphs.cols());
    let mut out = String::from("kind,index");
    for k in 0..d {
        let _ = write!(out, ",v{k}");
    }
    out.push('\n');
    for (kind, t) in [("graph", graphs), ("subgraph", subgraphs)] {
        for r in 0..t.rows() {
            let _ = write!(out, "{kind},{r}");
            for v in t.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}
