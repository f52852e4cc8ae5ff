//! The `gpconv` command line.
//!
//! Exit codes: 0 on success, 1 for input or configuration errors, 2 when a
//! check (gradient check) fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregation::AggregationKind;
use crate::data::{build_features, load_node_dataset, load_tu_dataset, FeatureMode, NodeDataset};
use crate::error::{Error, Result};
use crate::graph::{add_self_loops, build_adjacency, Graph};
use crate::model::{parse_kv, parse_schedule, ModelConfig, Task};
use crate::sparse::SparseMatrix;
use crate::train::{
    builtin_configs, grad_check, graph_fixture, node_fixture, run_protocol_graph, run_protocol_node, write_atomic,
    ProtocolSummary, TrainSpec,
};

#[derive(Debug, Parser)]
#[command(name = "gpconv", version, about = "Sparse graph convolution with transition-probability aggregation and DropNode")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transductive node classification over repeated runs.
    TrainNode(TrainNodeArgs),
    /// Graph classification with stratified k-fold cross validation.
    TrainGraph(TrainGraphArgs),
    /// Accuracy of 3/5/7/9-layer models with and without DropNode.
    DeepBench(DeepBenchArgs),
    /// Print an aggregation matrix with row/column sum diagnostics.
    InspectAgg(InspectAggArgs),
    /// Finite-difference check of every analytic gradient.
    Gradcheck(GradcheckArgs),
}

/// Model fields. Each flag overrides the key of the same name in `--config`.
#[derive(Debug, Default, Args)]
pub struct ModelFlags {
    /// Flat `key = value` file; any ModelConfig or TrainSpec field.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gcn, dgcnn or gpconv.
    #[arg(long, visible_alias = "agg")]
    pub aggregation: Option<String>,
    #[arg(long)]
    pub num_gpconv: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Keep schedule: node counts (`200,150`), a ratio (`0.75`) or `none`.
    #[arg(long)]
    pub dropnode: Option<String>,
    /// Shorthand for `--dropnode <ratio>`.
    #[arg(long, conflicts_with_all = ["dropnode", "no_dropnode"])]
    pub dropnode_ratio: Option<f64>,
    /// Shorthand for `--dropnode none`.
    #[arg(long, conflicts_with = "dropnode")]
    pub no_dropnode: bool,
    #[arg(long)]
    pub paired_upsample: Option<bool>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub num_fc: Option<usize>,
    #[arg(long)]
    pub fc_dim: Option<usize>,
}

/// Training fields. Each flag overrides the key of the same name in `--config`.
#[derive(Debug, Default, Args)]
pub struct SpecFlags {
    #[arg(long, visible_alias = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Early-stopping patience in epochs, or `none`.
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub full_batch_max_nodes: Option<usize>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, env = "GPCONV_SEED")]
    pub seed: Option<u64>,
    /// Add wall-clock times to the report (breaks byte-identical reruns).
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Args)]
pub struct TrainNodeArgs {
    /// Node dataset in the plain-text `.nds` layout.
    #[arg(long)]
    pub data: PathBuf,
    /// l1-normalize every feature row before training.
    #[arg(long)]
    pub row_normalize: bool,
    /// JSON-lines report: one line per run, then a summary line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub spec: SpecFlags,
}

#[derive(Debug, Args)]
pub struct TrainGraphArgs {
    /// Directory with `<name>_A.txt`, `<name>_graph_indicator.txt`, ...
    #[arg(long)]
    pub data: PathBuf,
    /// File prefix; defaults to the directory name.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "degree-label")]
    pub features: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub spec: SpecFlags,
}

#[derive(Debug, Args)]
pub struct DeepBenchArgs {
    /// Node datasets; repeat the flag for several.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 7, 9])]
    pub depths: Vec<usize>,
    #[arg(long)]
    pub row_normalize: bool,
    /// CSV table; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, visible_alias = "agg", default_value = "gcn")]
    pub aggregation: String,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[command(flatten)]
    pub spec: SpecFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// Triangle 0-1-3 with node 2 hanging off node 1.
    Kite,
    /// The 6-cycle.
    Cycle6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Text,
    Csv,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["data", "tu", "fixture"])))]
pub struct InspectAggArgs {
    /// Node dataset (`.nds`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TU dataset directory; pick the graph with `--graph`.
    #[arg(long)]
    pub tu: Option<PathBuf>,
    #[arg(long, requires = "tu")]
    pub name: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub graph: usize,
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    /// gcn, dgcnn or gpconv.
    #[arg(long, default_value = "gpconv")]
    pub kind: String,
    #[arg(long, value_enum, default_value = "text")]
    pub format: MatrixFormat,
    /// Write the matrix here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GradcheckModel {
    Node,
    Graph,
    All,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub model: GradcheckModel,
    /// Maximum relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, env = "GPCONV_SEED", default_value_t = 0)]
    pub seed: u64,
}

enum Failure {
    Input(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::TrainNode(a) => cmd_train_node(&a),
        Command::TrainGraph(a) => cmd_train_graph(&a),
        Command::DeepBench(a) => cmd_deep_bench(&a),
        Command::InspectAgg(a) => cmd_inspect_agg(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            2
        }
    }
}

type Overrides = Vec<(String, String)>;

fn read_config(path: Option<&Path>) -> Result<Overrides> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_kv(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .into_iter()
        .map(|(_, k, v)| (k, v))
        .collect())
}

fn push<T: ToString>(out: &mut Overrides, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        out.push((key.to_string(), v.to_string()));
    }
}

impl ModelFlags {
    fn overrides(&self, out: &mut Overrides) {
        push(out, "aggregation", &self.aggregation);
        push(out, "num_gpconv", &self.num_gpconv);
        push(out, "hidden_dim", &self.hidden_dim);
        push(out, "dropnode", &self.dropnode);
        push(out, "dropnode", &self.dropnode_ratio.map(|r| format!("{r:?}")));
        if self.no_dropnode {
            out.push(("dropnode".into(), "none".into()));
        }
        push(out, "paired_upsample", &self.paired_upsample);
        push(out, "dropout_rate", &self.dropout_rate);
        push(out, "num_fc", &self.num_fc);
        push(out, "fc_dim", &self.fc_dim);
    }
}

impl SpecFlags {
    fn overrides(&self, out: &mut Overrides) {
        push(out, "learning_rate", &self.learning_rate);
        push(out, "epochs", &self.epochs);
        push(out, "weight_decay", &self.weight_decay);
        push(out, "patience", &self.patience);
        push(out, "runs", &self.runs);
        push(out, "folds", &self.folds);
        push(out, "batch_size", &self.batch_size);
        push(out, "full_batch_max_nodes", &self.full_batch_max_nodes);
        push(out, "jobs", &self.jobs);
        push(out, "seed", &self.seed);
        if self.record_time {
            out.push(("record_time".into(), "true".into()));
        }
    }
}

/// Picks the preset for the task and DropNode regime, then applies the
/// overrides in order (config file first, then flags).
fn resolve(task: Task, input_dim: usize, num_classes: usize, overrides: &Overrides) -> Result<(ModelConfig, TrainSpec)> {
    let dropnode = match overrides.iter().rev().find(|(k, _)| k == "dropnode") {
        Some((_, v)) => !parse_schedule(v)?.is_empty(),
        None => task == Task::Graph,
    };
    let (mut model, mut spec) = match (task, dropnode) {
        (Task::Node, false) => (ModelConfig::node_default(input_dim, num_classes), TrainSpec::node(0.01)),
        (Task::Node, true) => (ModelConfig::node_dropnode(input_dim, num_classes), TrainSpec::node(0.001)),
        (Task::Graph, false) => (ModelConfig::graph_default(input_dim, num_classes), TrainSpec::graph()),
        (Task::Graph, true) => (ModelConfig::graph_dropnode(input_dim, num_classes), TrainSpec::graph()),
    };
    for (k, v) in overrides {
        if !spec.set(k, v)? {
            model.set(k, v)?;
        }
    }
    model.seed = spec.seed;
    if model.task != task {
        return Err(Error::Config(format!("this subcommand trains a {task} model, config says {}", model.task)));
    }
    if (model.input_dim, model.num_classes) != (input_dim, num_classes) {
        return Err(Error::Config(format!(
            "dataset has {input_dim} features and {num_classes} classes, config says {} and {}",
            model.input_dim, model.num_classes
        )));
    }
    model.validate()?;
    spec.validate()?;
    Ok((model, spec))
}

fn load_nodes(path: &Path, row_normalize: bool) -> Result<NodeDataset> {
    let mut ds = load_node_dataset(path)?;
    if row_normalize {
        ds.row_normalize()?;
    }
    Ok(ds)
}

fn summary_line(label: &str, s: &ProtocolSummary) -> String {
    format!(
        "{label}: test accuracy {:.2} ± {:.2} over {} runs",
        100.0 * s.mean_accuracy,
        100.0 * s.std_accuracy,
        s.runs.len()
    )
}

fn write_report(out: Option<&Path>, summary: &ProtocolSummary) -> Result<()> {
    if let Some(path) = out {
        write_atomic(path, summary.to_jsonl()?.as_bytes())?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_train_node(args: &TrainNodeArgs) -> std::result::Result<(), Failure> {
    let ds = load_nodes(&args.data, args.row_normalize)?;
    let mut overrides = read_config(args.model.config.as_deref())?;
    args.model.overrides(&mut overrides);
    args.spec.overrides(&mut overrides);
    let (model, spec) = resolve(Task::Node, ds.features().cols(), ds.num_classes, &overrides)?;
    log::info!("training {} runs of\n{}", spec.runs, model.to_kv());
    let summary = run_protocol_node(&ds, &model, &spec)?;
    write_report(args.out.as_deref(), &summary)?;
    println!("{}", summary_line(&args.data.display().to_string(), &summary));
    Ok(())
}

fn cmd_train_graph(args: &TrainGraphArgs) -> std::result::Result<(), Failure> {
    let name = match &args.name {
        Some(n) => n.clone(),
        None => args
            .data
            .components()
            .next_back()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config("cannot infer the dataset name; pass --name".into()))?,
    };
    let mode: FeatureMode = args.features.parse()?;
    let ds = build_features(load_tu_dataset(&args.data, &name)?, mode)?;
    let input_dim = ds.feature_dim().unwrap_or(0);
    let mut overrides = read_config(args.model.config.as_deref())?;
    args.model.overrides(&mut overrides);
    args.spec.overrides(&mut overrides);
    let (model, spec) = resolve(Task::Graph, input_dim, ds.num_classes(), &overrides)?;
    log::info!("{}-fold cross validation of\n{}", spec.folds, model.to_kv());
    let summary = run_protocol_graph(&ds, &model, &spec)?;
    write_report(args.out.as_deref(), &summary)?;
    println!("{}", summary_line(&name, &summary).replace(" runs", " folds"));
    Ok(())
}

const GRID_KEYS: [&str; 3] = ["num_gpconv", "dropnode", "paired_upsample"];

fn cmd_deep_bench(args: &DeepBenchArgs) -> std::result::Result<(), Failure> {
    let kind: AggregationKind = args.aggregation.parse()?;
    let mut overrides = read_config(args.config.as_deref())?;
    push(&mut overrides, "hidden_dim", &args.hidden_dim);
    args.spec.overrides(&mut overrides);
    if let Some((k, _)) = overrides.iter().find(|(k, _)| GRID_KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("`{k}` is set by the benchmark grid")).into());
    }
    if args.depths.iter().any(|&l| l == 0) {
        return Err(Error::Config("depths must be positive".into()).into());
    }
    let runs_given = overrides.iter().any(|(k, _)| k == "runs");

    let mut csv = String::from("dataset,aggregation,dropnode,layers,keep_schedule,runs,mean_accuracy,std_accuracy\n");
    for path in &args.data {
        let ds = load_nodes(path, args.row_normalize)?;
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        for &layers in &args.depths {
            for dropnode in [false, true] {
                let mut regime = overrides.clone();
                regime.insert(0, ("aggregation".into(), kind.name().into()));
                regime.insert(0, ("dropnode".into(), if dropnode { "1".into() } else { "none".into() }));
                let (mut model, mut spec) = resolve(Task::Node, ds.features().cols(), ds.num_classes, &regime)?;
                let deep = ModelConfig::deep_node(model.input_dim, model.num_classes, layers, dropnode);
                model.num_gpconv = deep.num_gpconv;
                model.dropnode = deep.dropnode;
                model.paired_upsample = deep.paired_upsample;
                model.validate()?;
                if !runs_given {
                    spec.runs = 10;
                }
                let summary = run_protocol_node(&ds, &model, &spec)?;
                log::info!("{label} L={layers} dropnode={dropnode}: {}", summary.mean_accuracy);
                let _ = writeln!(
                    csv,
                    "{label},{},{dropnode},{layers},{},{},{},{}",
                    kind.name(),
                    crate::model::format_schedule(&model.dropnode).replace(',', ";"),
                    summary.runs.len(),
                    summary.mean_accuracy,
                    summary.std_accuracy
                );
            }
        }
    }
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn fixture_graph(f: Fixture) -> Result<Graph> {
    match f {
        Fixture::Kite => Graph::new(4, [(0, 1), (0, 3), (1, 2), (1, 3)]),
        Fixture::Cycle6 => Graph::new(6, (0..6).map(|i| (i, (i + 1) % 6))),
    }
}

/// Dense dump of `m`: four decimals for text, shortest round-trip for CSV.
pub fn format_matrix(m: &SparseMatrix, format: MatrixFormat) -> String {
    let dense = m.to_dense();
    let mut out = String::new();
    for r in 0..dense.rows() {
        let cells: Vec<String> = dense
            .row(r)
            .iter()
            .map(|v| match format {
                MatrixFormat::Text => format!("{v:.4}"),
                MatrixFormat::Csv => format!("{v}"),
            })
            .collect();
        out.push_str(&cells.join(if format == MatrixFormat::Csv { "," } else { " " }));
        out.push('\n');
    }
    out
}

/// `rowsum_max_dev` and `colsum_max_dev`: largest distance of a row or
/// column sum from 1.
pub fn sum_diagnostics(m: &SparseMatrix) -> (f64, f64) {
    let dev = |sums: Vec<f64>| sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    (dev(m.row_sums()), dev(m.col_sums()))
}

fn cmd_inspect_agg(args: &InspectAggArgs) -> std::result::Result<(), Failure> {
    let kind: AggregationKind = args.kind.parse()?;
    let graph = if let Some(path) = &args.data {
        load_node_dataset(path)?.graph
    } else if let Some(dir) = &args.tu {
        let name = match &args.name {
            Some(n) => n.clone(),
            None => dir
                .components()
                .next_back()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        let ds = load_tu_dataset(dir, &name)?;
        let n = ds.num_graphs();
        ds.graphs
            .into_iter()
            .nth(args.graph)
            .ok_or_else(|| Error::InvalidArgument(format!("graph {} out of range (dataset has {n})", args.graph)))?
    } else {
        fixture_graph(args.fixture.expect("clap requires one source"))?
    };
    let m = kind.build(&add_self_loops(&build_adjacency(&graph)?)?)?;
    let dump = format_matrix(&m, args.format);
    match &args.out {
        Some(path) => write_atomic(path, dump.as_bytes())?,
        None => print!("{dump}"),
    }
    let (row_dev, col_dev) = sum_diagnostics(&m);
    println!(
        "# {} {}x{} nnz={} rowsum_max_dev={row_dev:.3e} colsum_max_dev={col_dev:.3e}",
        kind.name(),
        m.rows(),
        m.cols(),
        m.nnz()
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> std::result::Result<(), Failure> {
    let tasks = match args.model {
        GradcheckModel::Node => vec![Task::Node],
        GradcheckModel::Graph => vec![Task::Graph],
        GradcheckModel::All => vec![Task::Node, Task::Graph],
    };
    let mut failures = Vec::new();
    for task in tasks {
        for (name, config) in builtin_configs(task) {
            let fixture = match task {
                Task::Node => node_fixture(&config)?,
                Task::Graph => graph_fixture(&config)?,
            };
            let report = grad_check(&config, &fixture, args.tol, args.seed)?;
            let worst = report.worst();
            let verdict = if report.passed() { "ok" } else { "FAIL" };
            println!(
                "{name:<16} worst {:<12} rel {:.3e} abs {:.3e} {verdict}",
                worst.name, worst.max_relative_error, worst.max_abs_error
            );
            if !report.passed() {
                failures.push(format!("{name}: {} rel {:.3e} > {:.1e}", worst.name, worst.max_relative_error, args.tol));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}
