//! Compares the tape's gradients with central differences on a tiny model.
//!
//! `cargo run --example gradient_check`

use graphoracle::data::Dataset;
use graphoracle::explainer::{build_spec, Mode, TrainConfig};
use graphoracle::extract::{Subgraph, SubgraphSet};
use graphoracle::graph::{Graph, NodeSet};
use graphoracle::numerics::{Activation, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> graphoracle::Result<()> {
    let x = |n: usize, k: f64| {
        Tensor::from_vec(n, 2, (0..2 * n).map(|i| (i as f64 * k).sin()).collect())
    };
    let graphs = vec![
        Graph::new(0, [(0, 1), (1, 2)], x(3, 0.7)?, Some(0))?,
        Graph::new(1, [(0, 1), (1, 2), (2, 0), (2, 3)], x(4, 1.3)?, Some(1))?,
    ];
    let dataset = Dataset::new("tiny", graphs, 2)?;
    let subgraphs = SubgraphSet::new(vec![
        Subgraph::new(dataset.graph(0), NodeSet::new(0, [0, 1]))?,
        Subgraph::new(dataset.graph(1), NodeSet::new(1, [0, 1, 2]))?,
    ])?;

    let mut config = TrainConfig::default();
    config.gin.hidden_dims = vec![3, 3];
    config.fc.activation = Activation::Sigmoid;
    let spec = build_spec(&dataset, &subgraphs, &config)?;
    let mut store = spec.init_params(1);
    let graphs: Vec<&Graph> = dataset.graphs().iter().collect();
    let structures = subgraphs.structures();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let lambda = 0.8;
    let (parts, grads) =
        spec.loss_and_gradients(&store, &graphs, &structures, lambda, Mode::Eval, &mut rng)?;
    println!(
        "loss {:.6} = {lambda}·{:.6} + {:.1}·{:.6}",
        parts.total,
        parts.classification,
        1.0 - lambda,
        parts.regularization
    );

    let h = 1e-5;
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in &names {
        let mut worst: f64 = 0.0;
        for i in 0..store.expect(name)?.len() {
            let orig = store.expect(name)?.values()[i];
            let mut at = |v: f64| {
                store.get_mut(name).expect("parameter").values_mut()[i] = v;
                spec.loss_and_gradients(&store, &graphs, &structures, lambda, Mode::Eval, &mut rng)
                    .map(|(p, _)| p.total)
            };
            let numeric = (at(orig + h)? - at(orig - h)?) / (2.0 * h);
            at(orig)?;
            let analytic = grads[name].values()[i];
            worst =
                worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
        }
        println!("{name:<12} worst relative error {worst:.2e}");
    }
    Ok(())
}
