//! Fidelity of MUTAG explanations across sparsity levels, with and without
//! the entropy regularizer.
//!
//! `cargo run --release --example fidelity_sweep -- [seed]`

use graphoracle::cli::{DatasetSpec, RunConfig};
use graphoracle::data::split_dataset;
use graphoracle::explainer::train;
use graphoracle::extract::extract_subgraphs;
use graphoracle::fidelity::{evaluate_sweep, fidelity_csv, DEFAULT_SPARSITY_LEVELS};

fn main() -> graphoracle::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(Ok(0), |s| s.parse())
        .expect("seed");
    let base = RunConfig::for_dataset(DatasetSpec::bundled_mutag(), seed);
    let dataset = split_dataset(base.dataset.load(seed)?, &base.split, seed)?;
    let subgraphs = extract_subgraphs(&dataset, &base.walk)?;
    let test = dataset.select(&dataset.splits().test);

    for lambda in [base.train.lambda, 1.0] {
        let mut config = base.train.clone();
        config.lambda = lambda;
        let trained = train(&dataset, &subgraphs, &config)?;
        let results = evaluate_sweep(&trained.model, &test, &DEFAULT_SPARSITY_LEVELS)?;
        println!(
            "lambda {lambda}, test accuracy {:.3}",
            trained.model.accuracy(&test)?
        );
        print!("{}", fidelity_csv(&results, true));
    }
    Ok(())
}
