//! Command-line front end: `gen-data`, `extract`, `train`, `explain`, `eval`
//! and `pipeline`, all writing fixed file names under `--out-dir`.
//!
//! The effective [`RunConfig`] is assembled from per-dataset defaults, then
//! an optional `--config` JSON file, then explicit flags. Every command
//! records that config, its hash and the hashes of its inputs and outputs
//! in `run.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{
    bundled_mutag_dir, parse_tudataset, split_dataset, Dataset, DatasetKind, GeneratorConfig,
    SplitRatios,
};
use crate::error::{Error, Result};
use crate::explainer::{
    class_explanations, embeddings_csv, explanations_csv, heatmap, train, ModelCheckpoint,
    TrainConfig, TrainedModel,
};
use crate::extract::{extract_subgraphs, SubgraphFile, WalkConfig};
use crate::fidelity::{evaluate_sweep, fidelity_csv, FidelityResult, DEFAULT_SPARSITY_LEVELS};
use crate::io::{content_hash, read_json, sha256_hex, write_json, write_text};
use crate::numerics::Activation;

pub const DATASET_FILE: &str = "dataset.json";
pub const SUBGRAPH_FILE: &str = "subgraphs.json";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const EXPLANATIONS_FILE: &str = "explanations.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const FIDELITY_FILE: &str = "fidelity.csv";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Ba2motifs,
    Balrp,
    Tudataset,
}

/// Where the graphs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: SourceKind,
    /// Graph count for the synthetic generators.
    pub count: usize,
    /// Directory holding the TUDataset text files.
    pub path: Option<PathBuf>,
    /// TUDataset prefix, e.g. `MUTAG`.
    pub name: Option<String>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: SourceKind::Ba2motifs,
            count: 1000,
            path: None,
            name: None,
        }
    }
}

impl DatasetSpec {
    /// The MUTAG copy shipped with the crate.
    pub fn bundled_mutag() -> Self {
        DatasetSpec {
            kind: SourceKind::Tudataset,
            path: Some(bundled_mutag_dir()),
            name: Some("MUTAG".into()),
            ..DatasetSpec::default()
        }
    }

    /// Name the dataset will carry once loaded, used to pick defaults.
    pub fn display_name(&self) -> String {
        match self.kind {
            SourceKind::Ba2motifs => "BA-2Motifs".into(),
            SourceKind::Balrp => "BA-LRP".into(),
            SourceKind::Tudataset => self.name.clone().unwrap_or_default(),
        }
    }

    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self.kind {
            SourceKind::Ba2motifs => {
                GeneratorConfig::new(DatasetKind::Ba2Motifs, self.count, seed).generate()
            }
            SourceKind::Balrp => {
                GeneratorConfig::new(DatasetKind::Balrp, self.count, seed).generate()
            }
            SourceKind::Tudataset => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::invalid("a TUDataset source needs --path"))?;
                let name = match &self.name {
                    Some(n) => n.clone(),
                    None => path
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .ok_or_else(|| Error::invalid("a TUDataset source needs --name"))?,
                };
                parse_tudataset(path, &name)
            }
        }
    }
}

/// Everything one run needs. `seed` drives generation, splitting,
/// extraction and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub split: SplitRatios,
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub sparsity_levels: Vec<f64>,
    pub top_n: usize,
    /// Report fidelity in percent rather than as fractions.
    pub percent: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSpec::default(),
            split: SplitRatios::default(),
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            sparsity_levels: DEFAULT_SPARSITY_LEVELS.to_vec(),
            top_n: 10,
            percent: true,
            seed: 0,
        }
    }
}

fn normalized(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_ascii_lowercase()
}

impl RunConfig {
    /// Defaults tuned per dataset: extraction batch size and roots per
    /// batch, training mini-batch size and λ.
    pub fn preset(dataset_name: &str) -> Self {
        let mut c = RunConfig::default();
        let (walk_batch, top_k, train_batch, lambda) = match normalized(dataset_name).as_str() {
            "mutag" | "mutagenicity" => (150, 100, 150, 0.94),
            "ba2motifs" => (800, 200, 100, 0.87),
            _ => (512, 100, 100, 0.94),
        };
        c.walk.batch_size = walk_batch;
        c.walk.top_k = top_k;
        c.train.batch_size = train_batch;
        c.train.lambda = lambda;
        c
    }

    /// The preset for `dataset` with `seed` pushed into every stage.
    pub fn for_dataset(dataset: DatasetSpec, seed: u64) -> Self {
        let mut c = RunConfig::preset(&dataset.display_name());
        c.dataset = dataset;
        c.seed = seed;
        c.seeded()
    }

    /// Propagates the run seed into the stage configs.
    pub fn seeded(mut self) -> Self {
        self.walk.seed = self.seed;
        self.train.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.walk.validate()?;
        self.train.validate()?;
        if let Some(s) = self
            .sparsity_levels
            .iter()
            .find(|s| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::invalid(format!("sparsity level {s} not in [0, 1]")));
        }
        if matches!(self.dataset.kind, SourceKind::Ba2motifs | SourceKind::Balrp) {
            GeneratorConfig::new(DatasetKind::Ba2Motifs, self.dataset.count, 0).validate()?;
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn read_config_value(path: &Path) -> Result<Value> {
    let value: Value = read_json(path)?;
    if !value.is_object() {
        return Err(Error::invalid(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    }
    Ok(value)
}

/// Preset for `dataset_name`, overlaid with the config file if any.
fn base_config(dataset_name: &str, file: Option<&Value>) -> Result<RunConfig> {
    let mut value = serde_json::to_value(RunConfig::preset(dataset_name)).expect("serializable");
    if let Some(f) = file {
        merge(&mut value, f.clone());
    }
    serde_json::from_value(value).map_err(|e| Error::invalid(format!("config file: {e}")))
}

#[derive(Debug, Parser)]
#[command(
    name = "graphoracle",
    version,
    about = "Class-level self-explainable graph classification"
)]
pub struct Cli {
    /// Worker threads for internal parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset or ingest a TUDataset directory.
    GenData(GenDataArgs),
    /// Extract the subgraph set from the training split.
    Extract(ExtractArgs),
    /// Train the classifier.
    Train(TrainArgs),
    /// Rank subgraphs per class and export the heatmap.
    Explain(ExplainArgs),
    /// Fidelity of the explanations over sparsity levels.
    Eval(EvalArgs),
    /// All of the above in sequence.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON run config; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SourceKind>,
    /// Number of synthetic graphs.
    #[arg(long)]
    pub count: Option<usize>,
    /// TUDataset directory.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// TUDataset name prefix (defaults to the directory name).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WalkArgs {
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub walk_len: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Graphs per extraction batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// GIN layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// FC hidden activation.
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Number of FC layers.
    #[arg(long)]
    pub fc_layers: Option<usize>,
    /// Graphs per training mini-batch.
    #[arg(long)]
    pub train_batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportFlags {
    /// Subgraphs listed per class.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Sparsity levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Write fidelity as fractions instead of percent.
    #[arg(long)]
    pub fractions: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset file [default: <out-dir>/dataset.json].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub walk: WalkArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset file [default: <out-dir>/dataset.json].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Subgraph file [default: <out-dir>/subgraphs.json].
    #[arg(long)]
    pub subgraphs: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model checkpoint [default: <out-dir>/model.json].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset file [default: dataset.json next to the model].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Skip the heatmap export.
    #[arg(long)]
    pub no_heatmap: bool,
    /// Also export graph and subgraph embeddings.
    #[arg(long)]
    pub embeddings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model checkpoint [default: <out-dir>/model.json].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset file [default: dataset.json next to the model].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Sparsity levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Write fidelity as fractions instead of percent.
    #[arg(long)]
    pub fractions: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub report: ReportFlags,
}

impl SourceArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(k) = self.kind {
            if k != c.dataset.kind {
                c.dataset.path = None;
                c.dataset.name = None;
            }
            c.dataset.kind = k;
        }
        if let Some(n) = self.count {
            c.dataset.count = n;
        }
        if let Some(p) = &self.path {
            c.dataset.path = Some(p.clone());
        }
        if let Some(n) = &self.name {
            c.dataset.name = Some(n.clone());
        }
    }
}

impl WalkArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(k) = self.top_k {
            c.walk.top_k = k;
        }
        if let Some(l) = self.walk_len {
            c.walk.walk_length = l;
        }
        if let Some(p) = self.p {
            c.walk.p = p;
        }
        if let Some(q) = self.q {
            c.walk.q = q;
        }
        if let Some(b) = self.batch_size {
            c.walk.batch_size = b;
        }
    }
}

impl TrainFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(l) = self.lambda {
            c.train.lambda = l;
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            c.train.learning_rate = lr;
        }
        if let Some(h) = &self.hidden {
            c.train.gin.hidden_dims = h.clone();
        }
        if let Some(a) = self.activation {
            c.train.fc.activation = a;
        }
        if let Some(b) = self.train_batch_size {
            c.train.batch_size = b;
        }
        if let Some(m) = self.fc_layers {
            c.train.fc.layers = m;
        }
    }
}

impl ReportFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(n) = self.top_n {
            c.top_n = n;
        }
        if let Some(l) = &self.levels {
            c.sparsity_levels = l.clone();
        }
        if self.fractions {
            c.percent = false;
        }
    }
}

/// Resolves defaults < config file < flags for a dataset named
/// `dataset_name`, then validates.
fn resolve(
    common: &CommonArgs,
    file: Option<&Value>,
    dataset_name: &str,
    flags: impl FnOnce(&mut RunConfig),
) -> Result<RunConfig> {
    let mut c = base_config(dataset_name, file)?;
    flags(&mut c);
    if let Some(s) = common.seed {
        c.seed = s;
    }
    let c = c.seeded();
    c.validate()?;
    Ok(c)
}

fn load_file_config(common: &CommonArgs) -> Result<Option<Value>> {
    common.config.as_deref().map(read_config_value).transpose()
}

/// Dataset name a config file (plus source flags) points at, for presets.
fn declared_dataset(file: Option<&Value>, source: &SourceArgs) -> Result<String> {
    let mut c = base_config("", file)?;
    source.apply(&mut c);
    Ok(c.dataset.display_name())
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// One stage's entry in `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub config: RunConfig,
    pub config_hash: String,
    pub inputs: serde_json::Map<String, Value>,
    pub outputs: serde_json::Map<String, Value>,
    pub metrics: Value,
}

struct Stage {
    name: &'static str,
    out_dir: PathBuf,
    record: StageRecord,
}

impl Stage {
    fn new(name: &'static str, out_dir: &Path, config: &RunConfig) -> Self {
        Stage {
            name,
            out_dir: out_dir.to_path_buf(),
            record: StageRecord {
                config: config.clone(),
                config_hash: config.hash(),
                inputs: Default::default(),
                outputs: Default::default(),
                metrics: Value::Null,
            },
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let hash = file_hash(path)?;
        self.record
            .inputs
            .insert(path.display().to_string(), Value::String(hash));
        Ok(())
    }

    fn output(&mut self, file: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(file);
        let hash = file_hash(&path)?;
        self.record
            .outputs
            .insert(file.to_string(), Value::String(hash));
        Ok(path)
    }

    /// Adds this stage to `run.json`, keeping entries of other stages.
    fn finish(self, metrics: Value) -> Result<()> {
        let path = self.out_dir.join(RUN_FILE);
        let mut run: Value = if path.exists() {
            read_json(&path).unwrap_or_else(|_| json!({}))
        } else {
            json!({})
        };
        if !run.get("stages").is_some_and(Value::is_object) {
            run = json!({ "stages": {} });
        }
        let mut record = self.record;
        record.metrics = metrics;
        run["stages"][self.name] = serde_json::to_value(record).expect("serializable");
        write_json(&path, &run)
    }
}

fn or_default(explicit: &Option<PathBuf>, dir: &Path, file: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dir.join(file))
}

fn sibling(path: &Path, file: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(file)
}

/// Path of `target` as seen from `dir`: a bare file name when both share the
/// directory, absolute otherwise.
fn reference_from(dir: &Path, target: &Path) -> PathBuf {
    let same = match (dir.canonicalize(), target.parent().map(Path::canonicalize)) {
        (Ok(a), Some(Ok(b))) => a == b,
        _ => false,
    };
    match (same, target.file_name()) {
        (true, Some(name)) => PathBuf::from(name),
        _ => target
            .canonicalize()
            .unwrap_or_else(|_| target.to_path_buf()),
    }
}

fn dataset_metrics(d: &Dataset) -> Value {
    let s = d.splits();
    json!({
        "name": d.name(),
        "graphs": d.len(),
        "classes": d.num_classes(),
        "feature_dim": d.feature_dim(),
        "mean_nodes": d.mean_nodes(),
        "mean_edges": d.mean_edges(),
        "class_counts": d.class_counts(),
        "split_sizes": [s.train.len(), s.validation.len(), s.test.len()],
    })
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<Dataset> {
    let file = load_file_config(&args.common)?;
    let name = declared_dataset(file.as_ref(), &args.source)?;
    let config = resolve(&args.common, file.as_ref(), &name, |c| args.source.apply(c))?;
    gen_data(&config, &args.common.out_dir)
}

fn gen_data(config: &RunConfig, out_dir: &Path) -> Result<Dataset> {
    let raw = config.dataset.load(config.seed)?;
    let dataset = split_dataset(raw, &config.split, config.seed)?;
    let mut stage = Stage::new("gen-data", out_dir, config);
    dataset.save(&out_dir.join(DATASET_FILE))?;
    stage.output(DATASET_FILE)?;
    let mut metrics = dataset_metrics(&dataset);
    metrics["dataset_hash"] = Value::String(dataset.content_hash());
    stage.finish(metrics)?;
    log::info!("wrote {} graphs of {}", dataset.len(), dataset.name());
    Ok(dataset)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<SubgraphFile> {
    let out = &args.common.out_dir;
    let file = load_file_config(&args.common)?;
    // Flag values are checked before any file is read.
    resolve(&args.common, file.as_ref(), "", |c| args.walk.apply(c))?;
    let path = or_default(&args.dataset, out, DATASET_FILE);
    let dataset = Dataset::load(&path)?;
    let config = resolve(&args.common, file.as_ref(), dataset.name(), |c| {
        args.walk.apply(c)
    })?;
    let mut stage = Stage::new("extract", out, &config);
    stage.input(&path)?;
    extract(&config, &dataset, stage)
}

fn extract(config: &RunConfig, dataset: &Dataset, mut stage: Stage) -> Result<SubgraphFile> {
    let set = extract_subgraphs(dataset, &config.walk)?;
    let file = SubgraphFile::new(&set, &config.walk, dataset);
    file.save(&stage.out_dir.join(SUBGRAPH_FILE))?;
    stage.output(SUBGRAPH_FILE)?;
    let sizes: Vec<usize> = set.iter().map(|s| s.node_set().len()).collect();
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
    stage.finish(json!({ "subgraphs": set.len(), "mean_size": mean }))?;
    log::info!("extracted {} subgraphs", set.len());
    Ok(file)
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainedModel> {
    let out = &args.common.out_dir;
    let file = load_file_config(&args.common)?;
    let flags = |c: &mut RunConfig| args.train.apply(c);
    resolve(&args.common, file.as_ref(), "", flags)?;
    let data_path = or_default(&args.dataset, out, DATASET_FILE);
    let sg_path = or_default(&args.subgraphs, out, SUBGRAPH_FILE);
    let dataset = Dataset::load(&data_path)?;
    let config = resolve(&args.common, file.as_ref(), dataset.name(), flags)?;
    let sg_file = SubgraphFile::load(&sg_path)?;
    let mut stage = Stage::new("train", out, &config);
    stage.input(&data_path)?;
    stage.input(&sg_path)?;
    train_stage(&config, &dataset, &sg_file, &sg_path, stage)
}

fn train_stage(
    config: &RunConfig,
    dataset: &Dataset,
    sg_file: &SubgraphFile,
    sg_path: &Path,
    mut stage: Stage,
) -> Result<TrainedModel> {
    let subgraphs = sg_file.resolve(dataset)?;
    let trained = train(dataset, &subgraphs, &config.train)?;
    std::fs::create_dir_all(&stage.out_dir).map_err(|e| Error::io(&stage.out_dir, e))?;
    let reference = reference_from(&stage.out_dir, sg_path);
    ModelCheckpoint::new(&trained, sg_file, reference).save(&stage.out_dir.join(MODEL_FILE))?;
    trained
        .history
        .write_csv(&stage.out_dir.join(HISTORY_FILE))?;
    stage.output(MODEL_FILE)?;
    stage.output(HISTORY_FILE)?;
    let test = dataset.select(&dataset.splits().test);
    let test_acc = if test.is_empty() {
        None
    } else {
        Some(trained.model.accuracy(&test)?)
    };
    let best = &trained.history.epochs[trained.history.best_epoch - 1];
    stage.finish(json!({
        "best_epoch": trained.history.best_epoch,
        "train_accuracy": best.train_accuracy,
        "validation_accuracy": best.validation_accuracy,
        "test_accuracy": test_acc,
    }))?;
    log::info!("trained; best epoch {}", trained.history.best_epoch);
    Ok(trained)
}

fn load_model(model_path: &Path, dataset_path: &Path) -> Result<(Dataset, TrainedModel)> {
    let dataset = Dataset::load(dataset_path)?;
    let trained = ModelCheckpoint::load(model_path)?.restore(model_path, &dataset)?;
    Ok((dataset, trained))
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<()> {
    let out = &args.common.out_dir;
    let file = load_file_config(&args.common)?;
    let flags = |c: &mut RunConfig| {
        if let Some(n) = args.top_n {
            c.top_n = n;
        }
    };
    resolve(&args.common, file.as_ref(), "", flags)?;
    let model_path = or_default(&args.model, out, MODEL_FILE);
    let data_path = args
        .dataset
        .clone()
        .unwrap_or_else(|| sibling(&model_path, DATASET_FILE));
    let (dataset, trained) = load_model(&model_path, &data_path)?;
    let config = resolve(&args.common, file.as_ref(), dataset.name(), flags)?;
    let mut stage = Stage::new("explain", out, &config);
    stage.input(&model_path)?;
    stage.input(&data_path)?;
    explain(
        &config,
        &dataset,
        &trained,
        !args.no_heatmap,
        args.embeddings,
        stage,
    )
}

fn explain(
    config: &RunConfig,
    dataset: &Dataset,
    trained: &TrainedModel,
    with_heatmap: bool,
    with_embeddings: bool,
    mut stage: Stage,
) -> Result<()> {
    let weights = trained.model.class_dependency_matrix()?;
    let ranked = class_explanations(&weights, config.top_n);
    write_text(
        &stage.out_dir.join(EXPLANATIONS_FILE),
        &explanations_csv(&ranked, &trained.subgraphs)?,
    )?;
    stage.output(EXPLANATIONS_FILE)?;
    if with_heatmap {
        heatmap(&weights, true).write_csv(&stage.out_dir.join(HEATMAP_FILE))?;
        stage.output(HEATMAP_FILE)?;
    }
    if with_embeddings {
        let graphs: Vec<_> = dataset.graphs().iter().collect();
        let zg = trained.model.graph_embeddings(&graphs)?;
        let zs = trained.model.subgraph_embeddings()?;
        write_text(
            &stage.out_dir.join(EMBEDDINGS_FILE),
            &embeddings_csv(&zg, &zs)?,
        )?;
        stage.output(EMBEDDINGS_FILE)?;
    }
    let top: Vec<Value> = ranked
        .iter()
        .map(|r| r.first().map(|x| json!(x.subgraph)).unwrap_or(Value::Null))
        .collect();
    stage.finish(json!({ "top_subgraph_per_class": top }))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<FidelityResult>> {
    let out = &args.common.out_dir;
    let file = load_file_config(&args.common)?;
    let flags = |c: &mut RunConfig| {
        if let Some(l) = &args.levels {
            c.sparsity_levels = l.clone();
        }
        if args.fractions {
            c.percent = false;
        }
    };
    resolve(&args.common, file.as_ref(), "", flags)?;
    let model_path = or_default(&args.model, out, MODEL_FILE);
    let data_path = args
        .dataset
        .clone()
        .unwrap_or_else(|| sibling(&model_path, DATASET_FILE));
    let (dataset, trained) = load_model(&model_path, &data_path)?;
    let config = resolve(&args.common, file.as_ref(), dataset.name(), flags)?;
    let mut stage = Stage::new("eval", out, &config);
    stage.input(&model_path)?;
    stage.input(&data_path)?;
    eval(&config, &dataset, &trained, stage)
}

fn eval(
    config: &RunConfig,
    dataset: &Dataset,
    trained: &TrainedModel,
    mut stage: Stage,
) -> Result<Vec<FidelityResult>> {
    let mut graphs = dataset.select(&dataset.splits().test);
    if graphs.is_empty() {
        log::warn!("no test split; evaluating fidelity on all graphs");
        graphs = dataset.graphs().iter().collect();
    }
    let results = evaluate_sweep(&trained.model, &graphs, &config.sparsity_levels)?;
    write_text(
        &stage.out_dir.join(FIDELITY_FILE),
        &fidelity_csv(&results, config.percent),
    )?;
    stage.output(FIDELITY_FILE)?;
    stage.finish(json!({
        "graphs": graphs.len(),
        "accuracy": trained.model.accuracy(&graphs)?,
        "results": results,
    }))?;
    Ok(results)
}

/// Error from a named pipeline stage.
fn in_stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("stage {name}: {m}")),
        Error::Stale(m) => Error::Stale(format!("stage {name}: {m}")),
        other => Error::State(format!("stage {name} failed: {other}")),
    })
}

/// Outputs of a full pipeline run.
pub struct PipelineOutput {
    pub dataset: Dataset,
    pub trained: TrainedModel,
    pub fidelity: Vec<FidelityResult>,
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<PipelineOutput> {
    let file = load_file_config(&args.common)?;
    let name = declared_dataset(file.as_ref(), &args.source)?;
    let config = resolve(&args.common, file.as_ref(), &name, |c| {
        args.source.apply(c);
        args.walk.apply(c);
        args.train.apply(c);
        args.report.apply(c);
    })?;
    run_pipeline(&config, &args.common.out_dir)
}

/// Generates or ingests the data, then extracts, trains, explains and
/// evaluates with one config, writing every artifact under `out_dir`.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> Result<PipelineOutput> {
    config.validate()?;
    let dataset = in_stage("gen-data", gen_data(config, out_dir))?;
    let sg_file = in_stage(
        "extract",
        extract(config, &dataset, Stage::new("extract", out_dir, config)),
    )?;
    let sg_path = out_dir.join(SUBGRAPH_FILE);
    let trained = in_stage(
        "train",
        train_stage(
            config,
            &dataset,
            &sg_file,
            &sg_path,
            Stage::new("train", out_dir, config),
        ),
    )?;
    in_stage(
        "explain",
        explain(
            config,
            &dataset,
            &trained,
            true,
            false,
            Stage::new("explain", out_dir, config),
        ),
    )?;
    let fidelity = in_stage(
        "eval",
        eval(
            config,
            &dataset,
            &trained,
            Stage::new("eval", out_dir, config),
        ),
    )?;
    Ok(PipelineOutput {
        dataset,
        trained,
        fidelity,
    })
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a).map(drop),
        Command::Extract(a) => cmd_extract(a).map(drop),
        Command::Train(a) => cmd_train(a).map(drop),
        Command::Explain(a) => cmd_explain(a),
        Command::Eval(a) => cmd_eval(a).map(drop),
        Command::Pipeline(a) => cmd_pipeline(a).map(drop),
    }
}

/// Exit status for an error: 1 for usage and validation, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::debug!("thread pool already configured: {e}");
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_follow_dataset() {
        let m = RunConfig::preset("MUTAG");
        assert_eq!(
            (m.walk.batch_size, m.walk.top_k, m.train.lambda),
            (150, 100, 0.94)
        );
        assert_eq!(m.train.batch_size, 150);
        let b = RunConfig::preset("BA-2Motifs");
        assert_eq!(
            (b.walk.batch_size, b.walk.top_k, b.train.lambda),
            (800, 200, 0.87)
        );
        assert_eq!(b.train.batch_size, 100);
        assert_eq!(RunConfig::preset("BA-LRP").walk.batch_size, 512);
    }

    #[test]
    fn flags_override_file_override_preset() {
        let file = json!({ "train": { "lambda": 0.9, "epochs": 5 }, "walk": { "p": 2.0 } });
        let common = CommonArgs {
            out_dir: ".".into(),
            config: None,
            seed: Some(3),
        };
        let c = resolve(&common, Some(&file), "MUTAG", |c| c.train.epochs = 7).unwrap();
        assert_eq!(c.train.lambda, 0.9);
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.walk.p, 2.0);
        assert_eq!(c.walk.top_k, 100);
        assert_eq!((c.seed, c.walk.seed, c.train.seed), (3, 3, 3));
    }

    #[test]
    fn bad_config_is_a_validation_error() {
        let common = CommonArgs {
            out_dir: ".".into(),
            config: None,
            seed: None,
        };
        let err = resolve(&common, None, "", |c| c.train.lambda = 1.5).unwrap_err();
        assert_eq!(exit_code(&err), 1);
        let err = resolve(&common, Some(&json!({ "bogus": 1 })), "", |_| {}).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn merge_is_deep() {
        let mut a = json!({ "x": { "y": 1, "z": 2 }, "w": 3 });
        merge(&mut a, json!({ "x": { "y": 5 } }));
        assert_eq!(a, json!({ "x": { "y": 5, "z": 2 }, "w": 3 }));
    }
}
