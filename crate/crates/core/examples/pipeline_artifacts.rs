//! Runs the whole MUTAG pipeline into a directory, then reloads the model
//! checkpoint from disk and checks it predicts the same as the in-memory one.
//!
//! `cargo run --release --example pipeline_artifacts -- [out_dir]`

use std::path::PathBuf;

use graphoracle::cli::{run_pipeline, DatasetSpec, RunConfig, MODEL_FILE};
use graphoracle::explainer::ModelCheckpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "mutag-run".into())
        .into();
    std::fs::create_dir_all(&out)?;
    let config = RunConfig::for_dataset(DatasetSpec::bundled_mutag(), 0);
    let run = run_pipeline(&config, &out)?;
    for r in &run.fidelity {
        println!(
            "sparsity {:.2}: plus {:.4} minus {:.4} delta {:.4}",
            r.sparsity, r.fidelity_plus, r.fidelity_minus, r.fidelity_delta
        );
    }

    let path = out.join(MODEL_FILE);
    let restored = ModelCheckpoint::load(&path)?.restore(&path, &run.dataset)?;
    let test = run.dataset.select(&run.dataset.splits().test);
    let same = restored.model.predict(&test)? == run.trained.model.predict(&test)?;
    println!("restored checkpoint predicts identically: {same}");

    let mut files: Vec<String> = std::fs::read_dir(&out)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    files.sort();
    println!("artifacts in {}: {}", out.display(), files.join(", "));
    Ok(())
}
