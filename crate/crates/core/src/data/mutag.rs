//! Helpers for the bundled MUTAG molecules.

use std::path::PathBuf;

use crate::error::Result;
use crate::graph::Graph;

use super::{parse_tudataset, Dataset};

/// Atom symbols in node-label order.
pub const MUTAG_ATOMS: [&str; 7] = ["C", "N", "O", "F", "I", "Cl", "Br"];

const NITROGEN: usize = 1;
const OXYGEN: usize = 2;

/// Directory holding the MUTAG text files shipped with this crate.
pub fn bundled_mutag_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join("MUTAG")
}

/// Parses the bundled MUTAG copy.
pub fn load_mutag() -> Result<Dataset> {
    parse_tudataset(&bundled_mutag_dir(), "MUTAG")
}

/// Index of the hot entry in node `v`'s one-hot feature row.
pub fn atom_label(graph: &Graph, v: usize) -> Option<usize> {
    graph.features().row(v).iter().position(|&x| x == 1.0)
}

pub fn atom_symbol(graph: &Graph, v: usize) -> &'static str {
    atom_label(graph, v)
        .and_then(|l| MUTAG_ATOMS.get(l))
        .copied()
        .unwrap_or("?")
}

/// True when some nitrogen has at least two oxygen neighbours.
pub fn has_nitro_group(graph: &Graph) -> bool {
    (0..graph.num_nodes()).any(|v| {
        atom_label(graph, v) == Some(NITROGEN)
            && graph
                .neighbors(v)
                .iter()
                .filter(|&&u| atom_label(graph, u) == Some(OXYGEN))
                .count()
                >= 2
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn molecule(labels: &[usize], edges: &[(usize, usize)]) -> Graph {
        let mut x = Tensor::zeros(labels.len(), MUTAG_ATOMS.len());
        for (v, &l) in labels.iter().enumerate() {
            x.set(v, l, 1.0);
        }
        Graph::new(0, edges.iter().copied(), x, None).unwrap()
    }

    #[test]
    fn nitro_needs_two_oxygens_on_one_nitrogen() {
        assert!(has_nitro_group(&molecule(
            &[0, 1, 2, 2],
            &[(0, 1), (1, 2), (1, 3)]
        )));
        assert!(!has_nitro_group(&molecule(&[0, 1, 2], &[(0, 1), (1, 2)])));
        // Two nitrogens with one oxygen each.
        assert!(!has_nitro_group(&molecule(
            &[2, 1, 1, 2],
            &[(0, 1), (1, 2), (2, 3)]
        )));
    }

    #[test]
    fn bundled_copy_loads() {
        let d = load_mutag().unwrap();
        assert_eq!(d.len(), 188);
        assert_eq!(atom_symbol(d.graph(0), 0), "C");
    }
}
