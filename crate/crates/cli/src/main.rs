//! `derail`: generate fixtures, train, evaluate and run the state-derailment
//! detector on compiler-emitted ASTs.
//!
//! Exit codes: 0 when every contract is clean (or the command succeeded),
//! 1 when `detect` flags a contract, 2 on I/O or usage errors, 3 when the
//! training corpus has a single class.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::thread;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use derail_core::corpus::{synth_documents, write_fixtures, CorpusLoad};
use derail_core::detector::{
    cross_validate, evaluate, DetectionReport, DEFAULT_THRESHOLD, DEFAULT_TOP_K, MAX_TOP_K,
};
use derail_core::features::{extract_edges, EdgeKind};
use derail_core::gcn::{OptimizerKind, DEFAULT_HIDDEN_WIDTH};
use derail_core::graph::{VocabConfig, DEFAULT_EMBEDDING_DIM};
use derail_core::{
    build_graph, load_corpus, optimize_graph, parse_ast_json, run_experiment, AstTree,
    ExperimentConfig, GcnModel, GraphError, Label, LabeledContract, LabeledGraph, Metrics,
    ModelError, Pipeline, TrainConfig, Vocabulary,
};
use serde::Serialize;

/// Environment variable holding the log filter (`error`, `warn`, `info`, ...).
const LOG_ENV: &str = "DERAIL_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "derail",
    version,
    about = "State-derailment detection on Solidity compact ASTs"
)]
struct CliConfig {
    /// Raise log verbosity (-v info, -vv debug). The DERAIL_LOG variable takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a synthetic corpus of minimal pairs plus its manifest.
    Gen(GenArgs),
    /// Split a manifest, train on 90% and print held-out metrics as JSON.
    Train(TrainArgs),
    /// Classify contracts and localize salient nodes.
    Detect(DetectArgs),
    /// Print metrics of a trained model over every contract in a manifest.
    Eval(EvalArgs),
    /// Dump graph statistics for AST files.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of defective/clean pairs.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pairs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Target directory, created if needed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// JSON-lines manifest of {ast_path, label} records.
    manifest: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Hidden width of both graph convolutions.
    #[arg(long, default_value_t = DEFAULT_HIDDEN_WIDTH)]
    hidden: usize,
    /// Token embedding width.
    #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Weight of the L2 penalty.
    #[arg(long, default_value_t = 5e-4)]
    l2: f64,
    /// Use plain SGD instead of Adam.
    #[arg(long)]
    sgd: bool,
    /// Fraction of the corpus used for training.
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
    /// Run stratified k-fold cross-validation instead of a single split.
    /// No model is written in this mode.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value = "model.sgm")]
    out_model: PathBuf,
    #[arg(long, default_value = "vocab.json")]
    out_vocab: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of salient nodes listed per report (at most 10).
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write one `<name>.report.json` per input here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Compiler used for `.sol` inputs, invoked as `<SOLC> --ast-compact-json <file>`.
    #[arg(long)]
    solc: Option<PathBuf>,
    /// AST JSON files (or `.sol` files with --solc).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn io(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<ModelError>() {
            Some(ModelError::DegenerateCorpus(_)) => 3,
            _ => 2,
        };
        Failure { code, error }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn main() -> ExitCode {
    let cli = CliConfig::parse();
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, default_level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Cmd::Gen(a) => cmd_gen(&a).map(|_| 0),
        Cmd::Train(a) => cmd_train(&a).map(|_| 0),
        Cmd::Detect(a) => cmd_detect(&a),
        Cmd::Eval(a) => cmd_eval(&a).map(|_| 0),
        Cmd::Inspect(a) => cmd_inspect(&a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::io(anyhow!("{}: no such file", path.display())))
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let docs = synth_documents(a.pairs as usize, a.seed);
    let manifest = write_fixtures(&a.out, &docs)
        .with_context(|| format!("cannot write fixtures to {}", a.out.display()))
        .map_err(Failure::io)?;
    log::info!("wrote {} contracts", docs.len());
    println!("{}", manifest.display());
    Ok(())
}

fn load_manifest(manifest: &Path) -> Result<Vec<LabeledContract>, Failure> {
    require_file(manifest)?;
    let CorpusLoad {
        contracts,
        failures,
    } = load_corpus(manifest).with_context(|| format!("cannot load {}", manifest.display()))?;
    for f in &failures {
        log::warn!(
            "{}:{}: skipping {}: {}",
            manifest.display(),
            f.line,
            f.path.display(),
            f.error
        );
    }
    if contracts.is_empty() {
        return Err(Failure::io(anyhow!(
            "{}: no usable contracts",
            manifest.display()
        )));
    }
    Ok(contracts)
}

fn prepare_all(
    pipeline: &Pipeline,
    contracts: &[LabeledContract],
    vocab: &Vocabulary,
) -> Vec<LabeledGraph> {
    contracts
        .iter()
        .filter_map(|c| {
            let id = c.path.display().to_string();
            match pipeline.prepare(&c.tree, vocab) {
                Ok(p) => Some(LabeledGraph {
                    id,
                    graph: p.normalized,
                    label: c.label,
                }),
                Err(e) => {
                    log::warn!("skipping {id}: {e}");
                    None
                }
            }
        })
        .collect()
}

#[derive(Serialize)]
struct CrossValidation {
    folds: Vec<Metrics>,
    pooled: Metrics,
}

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let contracts = load_manifest(&a.manifest)?;
    let config = ExperimentConfig {
        train: TrainConfig {
            learning_rate: a.lr,
            epochs: a.epochs,
            seed: a.seed,
            hidden_width: a.hidden,
            l2_penalty: a.l2,
            optimizer: if a.sgd {
                OptimizerKind::Sgd
            } else {
                OptimizerKind::adam()
            },
        },
        vocab: VocabConfig {
            dim: a.dim,
            seed: a.seed,
            ..VocabConfig::default()
        },
        train_fraction: a.train_fraction,
    };
    let pipeline = Pipeline::default();

    if let Some(folds) = a.folds {
        config.train.validate()?;
        let vocab = pipeline
            .vocabulary(contracts.iter().map(|c| &c.tree), config.vocab)
            .context("cannot build vocabulary")?;
        let graphs = prepare_all(&pipeline, &contracts, &vocab);
        let (folds, pooled) = cross_validate(&graphs, &config.train, folds)?;
        return print_json(&CrossValidation { folds, pooled });
    }

    let exp = run_experiment(&pipeline, &contracts, &config)?;
    for s in &exp.skipped {
        log::warn!("skipped {}: {}", s.contract, s.error);
    }
    exp.model
        .save(&a.out_model)
        .with_context(|| format!("cannot write {}", a.out_model.display()))
        .map_err(Failure::io)?;
    exp.vocab
        .save(&a.out_vocab)
        .with_context(|| format!("cannot write {}", a.out_vocab.display()))
        .map_err(Failure::io)?;
    log::info!(
        "trained on {} contracts, tested on {}; model {}",
        exp.train_ids.len(),
        exp.test_ids.len(),
        a.out_model.display()
    );
    print_json(&exp.metrics)
}

fn load_model(a: &ModelArgs) -> Result<(GcnModel, Vocabulary), Failure> {
    require_file(&a.model)?;
    require_file(&a.vocab)?;
    if !a.threshold.is_finite() {
        return Err(Failure::io(anyhow!(
            "threshold {} is not finite",
            a.threshold
        )));
    }
    let vocab = Vocabulary::load(&a.vocab)
        .with_context(|| format!("cannot load vocabulary {}", a.vocab.display()))?;
    let model = GcnModel::load_checked(&a.model, &vocab)
        .with_context(|| format!("cannot load model {}", a.model.display()))?;
    Ok((model, vocab))
}

/// Parses an input, compiling it first when it is Solidity source. Returns
/// the tree and, when available, the source text for excerpts.
fn read_input(path: &Path, solc: Option<&Path>) -> anyhow::Result<(AstTree, Option<String>)> {
    let is_source = path.extension().is_some_and(|e| e == "sol");
    if is_source {
        let Some(solc) = solc else {
            bail!("{}: Solidity source needs --solc", path.display());
        };
        let output = Command::new(solc)
            .arg("--ast-compact-json")
            .arg(path)
            .output()
            .with_context(|| format!("cannot run {}", solc.display()))?;
        if !output.status.success() {
            bail!(
                "{} failed on {}: {}",
                solc.display(),
                path.display(),
                String::from_utf8_lossy(&output.stderr).trim()
            );
        }
        let stdout = String::from_utf8(output.stdout).context("compiler output is not UTF-8")?;
        // solc prints banner lines before the JSON document.
        let start = stdout
            .lines()
            .scan(0, |offset, line| {
                let here = *offset;
                *offset += line.len() + 1;
                Some((here, line))
            })
            .find(|(_, line)| line.starts_with('{'))
            .map(|(at, _)| at)
            .ok_or_else(|| anyhow!("no AST in compiler output for {}", path.display()))?;
        let tree =
            parse_ast_json(&stdout[start..]).with_context(|| format!("{}", path.display()))?;
        return Ok((tree, Some(fs::read_to_string(path)?)));
    }
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let tree = parse_ast_json(&text).with_context(|| format!("{}", path.display()))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let source = name
        .strip_suffix(".ast.json")
        .or_else(|| name.strip_suffix(".json"))
        .map(|stem| path.with_file_name(format!("{stem}.sol")))
        .and_then(|p| fs::read_to_string(p).ok());
    Ok((tree, source))
}

fn detect_one(
    path: &Path,
    a: &DetectArgs,
    pipeline: &Pipeline,
    model: &GcnModel,
    vocab: &Vocabulary,
) -> anyhow::Result<DetectionReport> {
    let (tree, source) = read_input(path, a.solc.as_deref())?;
    let prepared = pipeline
        .prepare(&tree, vocab)
        .with_context(|| format!("{}", path.display()))?;
    let report = DetectionReport::build(
        &path.display().to_string(),
        &prepared.graph,
        &prepared.normalized,
        model,
        a.model.threshold,
        a.top_k,
        source.as_deref(),
    )?;
    Ok(report)
}

fn cmd_detect(a: &DetectArgs) -> Result<u8, Failure> {
    for p in &a.inputs {
        require_file(p)?;
    }
    if a.top_k > MAX_TOP_K {
        log::warn!("--top-k {} capped at {MAX_TOP_K}", a.top_k);
    }
    let (model, vocab) = load_model(&a.model)?;
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::io)?;
    }
    let pipeline = Pipeline::default();

    // Reports are computed in parallel and emitted in input order.
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(a.inputs.len());
    let chunk = a.inputs.len().div_ceil(workers);
    let results: Vec<anyhow::Result<DetectionReport>> = thread::scope(|s| {
        let handles: Vec<_> = a
            .inputs
            .chunks(chunk)
            .map(|paths| {
                let (pipeline, model, vocab) = (&pipeline, &model, &vocab);
                s.spawn(move || {
                    paths
                        .iter()
                        .map(|p| detect_one(p, a, pipeline, model, vocab))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut out = io::stdout().lock();
    let (mut any_defective, mut any_failed) = (false, false);
    for (path, result) in a.inputs.iter().zip(results) {
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e:#}");
                any_failed = true;
                continue;
            }
        };
        any_defective |= report.verdict == Label::Defective;
        let body = match a.format {
            Format::Json => report.to_json() + "\n",
            Format::Text => report.to_text(),
        };
        match &a.out_dir {
            Some(dir) => {
                let name = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or("contract");
                let stem = name.strip_suffix(".ast.json").unwrap_or(name);
                let ext = if a.format == Format::Json {
                    "json"
                } else {
                    "txt"
                };
                let target = dir.join(format!("{stem}.report.{ext}"));
                fs::write(&target, body)
                    .with_context(|| format!("cannot write {}", target.display()))
                    .map_err(Failure::io)?;
            }
            None => out.write_all(body.as_bytes())?,
        }
    }
    Ok(if any_failed {
        2
    } else {
        u8::from(any_defective)
    })
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let contracts = load_manifest(&a.manifest)?;
    let (model, vocab) = load_model(&a.model)?;
    let graphs = prepare_all(&Pipeline::default(), &contracts, &vocab);
    if a.model.threshold == DEFAULT_THRESHOLD {
        return print_json(&evaluate(&model, &graphs)?);
    }
    let mut pairs = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let p = derail_core::predict(&model, &g.graph, a.model.threshold)?;
        pairs.push((p.verdict, g.label));
    }
    if pairs.is_empty() {
        return Err(ModelError::EmptyTestSet.into());
    }
    print_json(&Metrics::from_pairs(pairs))
}

#[derive(Serialize)]
struct GraphStats {
    path: String,
    ast_nodes: usize,
    categorized_nodes: usize,
    graph_nodes: usize,
    graph_edges: usize,
    anchors: usize,
    pruned_nodes: usize,
    pruned_edges: usize,
    edges_by_kind: BTreeMap<String, usize>,
    categories: BTreeMap<String, usize>,
}

fn inspect_one(path: &Path, pipeline: &Pipeline) -> anyhow::Result<GraphStats> {
    let (tree, _) = read_input(path, None)?;
    let tuples = pipeline.tuples(&tree);
    let edges = extract_edges(&tree, &tuples);
    let mut edges_by_kind = BTreeMap::new();
    for e in &edges {
        *edges_by_kind
            .entry(kind_name(e.e_t).to_owned())
            .or_default() += 1;
    }
    let mut categories = BTreeMap::new();
    for t in &tuples {
        *categories.entry(t.category.to_string()).or_default() += 1;
    }
    let mut stats = GraphStats {
        path: path.display().to_string(),
        ast_nodes: tree.len(),
        categorized_nodes: tuples.len(),
        graph_nodes: 0,
        graph_edges: 0,
        anchors: 0,
        pruned_nodes: 0,
        pruned_edges: 0,
        edges_by_kind,
        categories,
    };
    let graph = match build_graph(&tree, &tuples, &edges) {
        Ok(g) => g,
        Err(GraphError::EmptyGraph) => return Ok(stats),
        Err(e) => return Err(e.into()),
    };
    stats.graph_nodes = graph.len();
    stats.graph_edges = graph.edge_count();
    stats.anchors = graph.anchors.len();
    match optimize_graph(&graph, &pipeline.labels) {
        Ok(p) => {
            stats.pruned_nodes = p.len();
            stats.pruned_edges = p.edge_count();
        }
        Err(GraphError::EmptyGraph) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(stats)
}

fn kind_name(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::AstChild => "ast_child",
        EdgeKind::ControlFlow => "control_flow",
        EdgeKind::DataDep => "data_dep",
        EdgeKind::FuncCall => "func_call",
        EdgeKind::DeclRef => "decl_ref",
    }
}

fn cmd_inspect(a: &InspectArgs) -> Result<(), Failure> {
    for p in &a.inputs {
        require_file(p)?;
    }
    let pipeline = Pipeline::default();
    for p in &a.inputs {
        let s = inspect_one(p, &pipeline)?;
        match a.format {
            Format::Json => print_json(&s)?,
            Format::Text => {
                println!(
                    "{}: {} AST nodes, {} categorized, graph {} nodes / {} edges ({} anchors), pruned {} nodes / {} edges",
                    s.path, s.ast_nodes, s.categorized_nodes, s.graph_nodes, s.graph_edges, s.anchors, s.pruned_nodes, s.pruned_edges
                );
                for (k, n) in &s.edges_by_kind {
                    println!("  edge {k}: {n}");
                }
                for (k, n) in &s.categories {
                    println!("  category {k}: {n}");
                }
            }
        }
    }
    Ok(())
}
