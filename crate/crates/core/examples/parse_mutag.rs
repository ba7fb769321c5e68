//! Parses the bundled MUTAG molecules and writes them back out.
//!
//! `cargo run --example parse_mutag -- [out_dir]`

use std::collections::BTreeMap;

use graphoracle::data::{atom_symbol, has_nitro_group, load_mutag, write_tudataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = load_mutag()?;
    println!(
        "{}: {} graphs, {} classes {:?}, {} atom types, {:.2} atoms on average",
        dataset.name(),
        dataset.len(),
        dataset.num_classes(),
        dataset.class_counts(),
        dataset.feature_dim(),
        dataset.mean_nodes(),
    );

    let mut atoms: BTreeMap<&str, usize> = BTreeMap::new();
    for g in dataset.graphs() {
        for v in 0..g.num_nodes() {
            *atoms.entry(atom_symbol(g, v)).or_default() += 1;
        }
    }
    println!("atom counts: {atoms:?}");
    let nitro = dataset
        .graphs()
        .iter()
        .filter(|g| has_nitro_group(g))
        .count();
    println!("molecules with a nitro group: {nitro}");

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        write_tudataset(&dataset, dir.as_ref(), "MUTAG")?;
        println!("wrote TUDataset files to {dir}");
    }
    Ok(())
}
