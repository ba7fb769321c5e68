//! Trains on MUTAG and prints the top subgraphs for each class as atoms and
//! bonds, plus the class-by-subgraph heatmap.
//!
//! `cargo run --release --example explain_mutag -- [seed] [top_n]`

use graphoracle::cli::{DatasetSpec, RunConfig};
use graphoracle::data::{atom_symbol, has_nitro_group, split_dataset};
use graphoracle::explainer::{class_explanations, heatmap, train};
use graphoracle::extract::extract_subgraphs;

fn main() -> graphoracle::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");
    let top_n = args.next().map_or(Ok(5), |s| s.parse()).expect("top_n");
    let config = RunConfig::for_dataset(DatasetSpec::bundled_mutag(), seed);

    let dataset = split_dataset(config.dataset.load(seed)?, &config.split, seed)?;
    let subgraphs = extract_subgraphs(&dataset, &config.walk)?;
    let trained = train(&dataset, &subgraphs, &config.train)?;
    let test = dataset.select(&dataset.splits().test);
    println!(
        "{} subgraphs, test accuracy {:.3}, subgraph entropy {:.4}",
        subgraphs.len(),
        trained.model.accuracy(&test)?,
        trained.model.mean_subgraph_entropy()?
    );

    let w = trained.model.class_dependency_matrix()?;
    let names = ["non-mutagenic", "mutagenic"];
    for (class, ranked) in class_explanations(&w, top_n).iter().enumerate() {
        println!("{}:", names[class]);
        for r in ranked {
            let s = trained.subgraphs.get(r.subgraph).structure();
            let bonds: Vec<String> = s
                .edges()
                .iter()
                .map(|&(a, b)| format!("{}{a}-{}{b}", atom_symbol(s, a), atom_symbol(s, b)))
                .collect();
            let nitro = if has_nitro_group(s) { " [NO2]" } else { "" };
            println!(
                "  {:>4} w {:+.3}{nitro}  {}",
                r.subgraph,
                r.weight,
                bonds.join(" ")
            );
        }
    }

    let map = heatmap(&w, true);
    let csv = map.to_csv();
    println!(
        "heatmap: {} lines of csv, first row starts {:.60}",
        csv.lines().count(),
        csv.lines().nth(1).unwrap_or("")
    );
    Ok(())
}
