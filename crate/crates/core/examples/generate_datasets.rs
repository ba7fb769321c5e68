//! Generates the two synthetic benchmarks and prints their shape.
//!
//! `cargo run --example generate_datasets -- [count] [seed]`

use graphoracle::data::{DatasetKind, GeneratorConfig};

fn main() -> graphoracle::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().map_or(Ok(1000), |s| s.parse()).expect("count");
    let seed = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");

    for kind in [DatasetKind::Ba2Motifs, DatasetKind::Balrp] {
        let dataset = GeneratorConfig::new(kind, count, seed).generate()?;
        println!(
            "{}: {} graphs, classes {:?}, {:.2} nodes and {:.2} edges on average, {} features",
            dataset.name(),
            dataset.len(),
            dataset.class_counts(),
            dataset.mean_nodes(),
            dataset.mean_edges(),
            dataset.feature_dim(),
        );
        let g = dataset.graph(0);
        println!(
            "  graph 0: label {:?}, degrees {:?}",
            g.label(),
            g.degree_centrality()
        );
    }
    Ok(())
}
