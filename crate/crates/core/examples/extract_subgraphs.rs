//! Mines the subgraph bank from MUTAG's training split with biased walks.
//!
//! `cargo run --example extract_subgraphs -- [top_k] [p] [q]`

use std::collections::BTreeMap;

use graphoracle::data::{atom_symbol, load_mutag, split_dataset, SplitRatios};
use graphoracle::extract::{extract_subgraphs, WalkConfig};

fn main() -> graphoracle::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut config = WalkConfig::default();
    if let Some(k) = args.next() {
        config.top_k = k.parse().expect("top_k");
    }
    if let Some(p) = args.next() {
        config.p = p.parse().expect("p");
    }
    if let Some(q) = args.next() {
        config.q = q.parse().expect("q");
    }

    let dataset = split_dataset(load_mutag()?, &SplitRatios::default(), 0)?;
    let set = extract_subgraphs(&dataset, &config)?;
    println!(
        "{} subgraphs from {} training graphs (K = {}, walk length {}, p = {}, q = {})",
        set.len(),
        dataset.splits().train.len(),
        config.top_k,
        config.walk_length,
        config.p,
        config.q
    );

    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for sg in set.iter() {
        *sizes.entry(sg.structure().num_nodes()).or_default() += 1;
    }
    println!("node count histogram: {sizes:?}");

    for sg in set.iter().take(5) {
        let s = sg.structure();
        let atoms: Vec<&str> = (0..s.num_nodes()).map(|v| atom_symbol(s, v)).collect();
        println!(
            "  graph {} nodes {:?}: {}",
            sg.source_graph(),
            sg.node_set().nodes(),
            atoms.join("")
        );
    }
    Ok(())
}
