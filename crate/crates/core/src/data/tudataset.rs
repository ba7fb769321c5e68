//! TUDataset text format: `{name}_A.txt`, `{name}_graph_indicator.txt`,
//! `{name}_graph_labels.txt` and optionally `{name}_node_labels.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Tensor;

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

/// Non-blank lines with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_ints(path: &Path) -> Result<Vec<(usize, i64)>> {
    read_lines(path)?
        .into_iter()
        .map(|(ln, l)| {
            l.parse::<i64>()
                .map(|v| (ln, v))
                .map_err(|_| format_err(path, ln, format!("expected an integer, got {l:?}")))
        })
        .collect()
}

/// Maps sorted distinct values to `0..k`.
fn contiguous_codes(values: impl Iterator<Item = i64>) -> BTreeMap<i64, usize> {
    let mut codes: BTreeMap<i64, usize> = values.map(|v| (v, 0)).collect();
    for (i, code) in codes.values_mut().enumerate() {
        *code = i;
    }
    codes
}

pub fn parse_tudataset(dir: &Path, name: &str) -> Result<Dataset> {
    let indicator_path = file_path(dir, name, "graph_indicator");
    let indicator = read_ints(&indicator_path)?;
    let num_nodes = indicator.len();

    // Node -> graph (0-based) and each graph's first global node.
    let mut node_graph = Vec::with_capacity(num_nodes);
    let mut graph_start = Vec::new();
    for (node, &(ln, gid)) in indicator.iter().enumerate() {
        let expected_next = graph_start.len() as i64 + 1;
        if gid == expected_next {
            graph_start.push(node);
        } else if gid != expected_next - 1 || graph_start.is_empty() {
            return Err(format_err(
                &indicator_path,
                ln,
                format!(
                    "graph id {gid} breaks contiguous numbering (expected {} or {expected_next})",
                    expected_next - 1
                ),
            ));
        }
        node_graph.push(graph_start.len() - 1);
    }
    let num_graphs = graph_start.len();
    let graph_size = |g: usize| {
        let end = graph_start.get(g + 1).copied().unwrap_or(num_nodes);
        end - graph_start[g]
    };

    let labels_path = file_path(dir, name, "graph_labels");
    let raw_labels = read_ints(&labels_path)?;
    if raw_labels.len() != num_graphs {
        let line = raw_labels.last().map_or(1, |l| l.0);
        return Err(format_err(
            &labels_path,
            line,
            format!("{} graph labels for {num_graphs} graphs", raw_labels.len()),
        ));
    }
    let label_codes = contiguous_codes(raw_labels.iter().map(|l| l.1));

    let node_labels_path = file_path(dir, name, "node_labels");
    let node_labels = if node_labels_path.exists() {
        let raw = read_ints(&node_labels_path)?;
        if raw.len() != num_nodes {
            let line = raw.last().map_or(1, |l| l.0);
            return Err(format_err(
                &node_labels_path,
                line,
                format!("{} node labels for {num_nodes} nodes", raw.len()),
            ));
        }
        Some(raw)
    } else {
        None
    };

    let adjacency_path = file_path(dir, name, "A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (ln, line) in read_lines(&adjacency_path)? {
        let mut parts = line.split(',').map(str::trim);
        let mut endpoint = || -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| format_err(&adjacency_path, ln, "expected two node ids"))?;
            let id: usize = tok
                .parse()
                .map_err(|_| format_err(&adjacency_path, ln, format!("bad node id {tok:?}")))?;
            if id == 0 || id > num_nodes {
                return Err(format_err(
                    &adjacency_path,
                    ln,
                    format!("dangling node reference {id} (valid: 1..={num_nodes})"),
                ));
            }
            Ok(id - 1)
        };
        let (a, b) = (endpoint()?, endpoint()?);
        if node_graph[a] != node_graph[b] {
            return Err(format_err(
                &adjacency_path,
                ln,
                format!("edge ({}, {}) joins different graphs", a + 1, b + 1),
            ));
        }
        if a == b {
            return Err(format_err(
                &adjacency_path,
                ln,
                format!("self-loop on node {}", a + 1),
            ));
        }
        let g = node_graph[a];
        edges[g].push((a - graph_start[g], b - graph_start[g]));
    }

    let (feature_dim, node_codes) = match &node_labels {
        Some(raw) => {
            let codes = contiguous_codes(raw.iter().map(|l| l.1));
            (codes.len(), Some(codes))
        }
        None => (1, None),
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, graph_edges) in edges.into_iter().enumerate() {
        let n = graph_size(g);
        let features = match (&node_labels, &node_codes) {
            (Some(raw), Some(codes)) => {
                let mut f = Tensor::zeros(n, feature_dim);
                for local in 0..n {
                    let code = codes[&raw[graph_start[g] + local].1];
                    f.set(local, code, 1.0);
                }
                f
            }
            _ => Tensor::filled(n, 1, 1.0),
        };
        let label = label_codes[&raw_labels[g].1];
        graphs.push(Graph::new(g, graph_edges, features, Some(label))?);
    }
    Dataset::new(name, graphs, label_codes.len())
}

/// Index of the single `1.0` in a one-hot row.
fn one_hot_index(row: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &v) in row.iter().enumerate() {
        if v == 1.0 && hit.is_none() {
            hit = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hit
}

/// Writes `dataset` in TUDataset form. Labels are written as their
/// contiguous codes; one-hot features become node labels, a constant
/// scalar `1.0` feature is written as no node-label file at all.
pub fn write_tudataset(dataset: &Dataset, dir: &Path, name: &str) -> Result<()> {
    let one_hot: Option<Vec<usize>> = dataset
        .graphs()
        .iter()
        .flat_map(|g| (0..g.num_nodes()).map(move |v| one_hot_index(g.features().row(v))))
        .collect();
    let constant_unit = dataset.feature_dim() == 1
        && dataset
            .graphs()
            .iter()
            .all(|g| g.features().values().iter().all(|&v| v == 1.0));
    if one_hot.is_none() && !constant_unit {
        return Err(Error::invalid(
            "features are neither one-hot nor constant unit scalars",
        ));
    }

    let mut a = String::new();
    let mut indicator = String::new();
    let mut graph_labels = String::new();
    let mut offset = 0;
    for (g, graph) in dataset.graphs().iter().enumerate() {
        for v in 0..graph.num_nodes() {
            for &u in graph.neighbors(v) {
                let _ = writeln!(a, "{}, {}", offset + v + 1, offset + u + 1);
            }
            let _ = writeln!(indicator, "{}", g + 1);
        }
        let label = graph
            .label()
            .ok_or_else(|| Error::invalid(format!("graph {g} has no label")))?;
        let _ = writeln!(graph_labels, "{label}");
        offset += graph.num_nodes();
    }

    let write = |suffix: &str, text: &str| {
        let path = file_path(dir, name, suffix);
        crate::io::write_text(&path, text)
    };
    write("A", &a)?;
    write("graph_indicator", &indicator)?;
    write("graph_labels", &graph_labels)?;
    if !constant_unit {
        let codes = one_hot.expect("checked above");
        let text: String = codes.iter().map(|c| format!("{c}\n")).collect();
        write("node_labels", &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path) {
        // triangle (nodes 1-3) and a single edge (nodes 4-5), labels {-1, 1}
        fs::write(
            dir.join("T_A.txt"),
            "1, 2\n2, 1\n2, 3\n3, 2\n3, 1\n1, 3\n4,5\n5,4\n",
        )
        .unwrap();
        fs::write(dir.join("T_graph_indicator.txt"), "1\n1\n1\n2\n2\n").unwrap();
        fs::write(dir.join("T_graph_labels.txt"), "1\n-1\n").unwrap();
        fs::write(dir.join("T_node_labels.txt"), "0\n3\n0\n3\n3\n").unwrap();
    }

    #[test]
    fn parses_fixture() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let d = parse_tudataset(dir.path(), "T").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.graph(0).num_nodes(), 3);
        assert_eq!(d.graph(0).num_edges(), 3);
        assert_eq!(d.graph(1).num_nodes(), 2);
        assert_eq!(d.graph(1).edges(), &[(0, 1)]);
        assert_eq!(d.num_classes(), 2);
        assert_eq!(d.graph(0).label(), Some(1));
        assert_eq!(d.graph(1).label(), Some(0));
        assert_eq!(d.feature_dim(), 2);
        assert_eq!(
            d.graph(0).features().values(),
            &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::remove_file(dir.path().join("T_graph_labels.txt")).unwrap();
        let err = parse_tudataset(dir.path(), "T").unwrap_err();
        assert!(err.to_string().contains("T_graph_labels.txt"), "{err}");
    }

    #[test]
    fn dangling_reference_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::write(dir.path().join("T_A.txt"), "1, 2\n2, 9\n").unwrap();
        match parse_tudataset(dir.path(), "T").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_contiguous_indicator_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::write(dir.path().join("T_graph_indicator.txt"), "1\n1\n1\n3\n3\n").unwrap();
        match parse_tudataset(dir.path(), "T").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_node_labels_gives_unit_features() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::remove_file(dir.path().join("T_node_labels.txt")).unwrap();
        let d = parse_tudataset(dir.path(), "T").unwrap();
        assert_eq!(d.feature_dim(), 1);
        let out = tempfile::tempdir().unwrap();
        write_tudataset(&d, out.path(), "T").unwrap();
        assert!(!out.path().join("T_node_labels.txt").exists());
        assert_eq!(parse_tudataset(out.path(), "T").unwrap(), d);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let d = parse_tudataset(dir.path(), "T").unwrap();
        let out = tempfile::tempdir().unwrap();
        write_tudataset(&d, out.path(), "T").unwrap();
        assert_eq!(parse_tudataset(out.path(), "T").unwrap(), d);
    }
}
