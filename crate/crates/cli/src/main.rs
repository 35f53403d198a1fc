//! Command-line frontend. Each pipeline stage is a subcommand; `run`
//! chains them. Options come from defaults, then an optional TOML config
//! file, then flags, with later sources winning.

use clap::{Args, Parser, Subcommand};
use logsmith::callgraph::{build_call_graph, CallGraph};
use logsmith::loggraph::{build_log_graph, filter_constant_false_paths};
use logsmith::modelgw::{BackendConfig, BackendKind};
use logsmith::pipeline::{
    self, read_meta_for, report_path, retrieval_path, PipelineError, RunConfig,
};
use logsmith::promptkit::Ablations;
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_CORPUS: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(
    name = "logsmith",
    version,
    about = "Generate and evaluate contextualized Java logging statements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a Java corpus, carve logging samples, and write the dataset.
    Ingest(CommonOpts),
    /// Build analysis graphs from an ingested dataset.
    Analyze {
        #[command(subcommand)]
        graph: AnalyzeCommand,
    },
    /// Rank in-project logging examples for every test sample.
    Retrieve(CommonOpts),
    /// Prompt the backend for every test sample and record the results.
    Generate(CommonOpts),
    /// Score recorded generations and write the report.
    Evaluate(CommonOpts),
    /// The whole pipeline in one invocation.
    Run {
        /// Ingest and analyze first instead of expecting artifacts on disk.
        #[arg(long)]
        build: bool,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Resolve call sites and write the method call graph.
    Callgraph(CommonOpts),
    /// Connect logging statements along control flow and write the graph.
    Loggraph(CommonOpts),
}

#[derive(Args, Default)]
struct CommonOpts {
    /// TOML config file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus root directory.
    #[arg(long)]
    root: Option<PathBuf>,
    /// Project name recorded on samples.
    #[arg(long)]
    project: Option<String>,
    /// Glob pattern to exclude from the scan; repeatable.
    #[arg(long = "exclude")]
    exclude: Vec<String>,
    /// Dataset path (JSONL).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Call-graph artifact path.
    #[arg(long)]
    callgraph: Option<PathBuf>,
    /// Log-graph artifact path.
    #[arg(long)]
    loggraph: Option<PathBuf>,
    /// Directory for run artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Slice walk depth in both directions.
    #[arg(long)]
    hops: Option<u8>,
    /// Retrieved examples per prompt (1-9).
    #[arg(short = 'k', long)]
    k_examples: Option<usize>,
    /// Master seed for splits and slice walks.
    #[arg(long)]
    seed: Option<u64>,
    /// Pipeline ablation; repeatable (no-scope, no-style, no-refine).
    #[arg(long = "ablate")]
    ablations: Vec<String>,
    /// Only the first N test samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Write every rendered prompt to this directory.
    #[arg(long)]
    dump_prompts: Option<PathBuf>,
    /// Keep log-graph paths that run through constant-false branches.
    #[arg(long)]
    keep_infeasible: bool,
    /// Backend kind: mock-echo, mock-canned, or http.
    #[arg(long)]
    backend: Option<String>,
    /// Chat-completion endpoint URL (http backend).
    #[arg(long)]
    base_url: Option<String>,
    /// Model name sent to the endpoint (http backend).
    #[arg(long)]
    model: Option<String>,
    /// Environment variable that holds the API key; the key itself is
    /// never written to any file.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    request_timeout_ms: Option<u64>,
    #[arg(long)]
    max_concurrent_requests: Option<usize>,
    /// Canned-response JSON file (mock-canned backend).
    #[arg(long)]
    canned_path: Option<PathBuf>,
}

/// Flat TOML file mirroring the run configuration field names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    root: Option<PathBuf>,
    project: Option<String>,
    exclude: Option<Vec<String>>,
    dataset: Option<PathBuf>,
    callgraph: Option<PathBuf>,
    loggraph: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    hops: Option<u8>,
    k_examples: Option<usize>,
    seed: Option<u64>,
    ablations: Option<Vec<String>>,
    limit: Option<usize>,
    dump_prompts: Option<PathBuf>,
    filter_infeasible: Option<bool>,
    backend: Option<String>,
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    max_retries: Option<u32>,
    request_timeout_ms: Option<u64>,
    max_concurrent_requests: Option<usize>,
    backoff_base_ms: Option<u64>,
    canned_path: Option<PathBuf>,
}

struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn config(message: impl Into<String>) -> CliFailure {
        CliFailure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for CliFailure {
    fn from(err: PipelineError) -> CliFailure {
        let code = match &err {
            PipelineError::Config(_) | PipelineError::Prompt(_) | PipelineError::Retrieval(_) => {
                EXIT_CONFIG
            }
            PipelineError::Corpus(_)
            | PipelineError::CallGraph(_)
            | PipelineError::LogGraph(_)
            | PipelineError::Eval(_)
            | PipelineError::Io { .. } => EXIT_CORPUS,
            PipelineError::Gateway(_) => EXIT_BACKEND,
        };
        CliFailure {
            code,
            message: err.to_string(),
        }
    }
}

fn parse_backend_kind(name: &str) -> Result<BackendKind, CliFailure> {
    match name {
        "mock-echo" => Ok(BackendKind::MockEcho),
        "mock-canned" => Ok(BackendKind::MockCanned),
        "http" => Ok(BackendKind::Http),
        other => Err(CliFailure::config(format!(
            "unknown backend kind {other:?} (expected mock-echo, mock-canned, or http)"
        ))),
    }
}

/// Defaults, file values, then flags, in that order.
fn resolve_config(opts: &CommonOpts, build: bool) -> Result<RunConfig, CliFailure> {
    let mut cfg = RunConfig::default();
    let mut backend = BackendConfig::default();
    let mut ablation_flags: Vec<String> = Vec::new();

    if let Some(path) = &opts.config {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliFailure::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let file: FileConfig = toml::from_str(&raw).map_err(|e| {
            CliFailure::config(format!("bad config {}: {e}", path.display()))
        })?;
        if let Some(v) = file.root {
            cfg.root = v;
        }
        if file.project.is_some() {
            cfg.project = file.project;
        }
        if let Some(v) = file.exclude {
            cfg.exclude = v;
        }
        if let Some(v) = file.dataset {
            cfg.dataset = v;
        }
        if let Some(v) = file.callgraph {
            cfg.callgraph_path = v;
        }
        if let Some(v) = file.loggraph {
            cfg.loggraph_path = v;
        }
        if let Some(v) = file.out_dir {
            cfg.out_dir = v;
        }
        if let Some(v) = file.hops {
            cfg.hops = v;
        }
        if let Some(v) = file.k_examples {
            cfg.k_examples = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.ablations {
            ablation_flags = v;
        }
        if file.limit.is_some() {
            cfg.limit = file.limit;
        }
        if file.dump_prompts.is_some() {
            cfg.dump_prompts = file.dump_prompts;
        }
        if let Some(v) = file.filter_infeasible {
            cfg.filter_infeasible = v;
        }
        if let Some(v) = file.backend {
            backend.kind = parse_backend_kind(&v)?;
        }
        if let Some(v) = file.base_url {
            backend.base_url = v;
        }
        if let Some(v) = file.model {
            backend.model = v;
        }
        if file.api_key_env.is_some() {
            backend.api_key_env = file.api_key_env;
        }
        if let Some(v) = file.temperature {
            backend.temperature = v;
        }
        if let Some(v) = file.max_retries {
            backend.max_retries = v;
        }
        if let Some(v) = file.request_timeout_ms {
            backend.request_timeout_ms = v;
        }
        if let Some(v) = file.max_concurrent_requests {
            backend.max_concurrent_requests = v;
        }
        if let Some(v) = file.backoff_base_ms {
            backend.backoff_base_ms = v;
        }
        if file.canned_path.is_some() {
            backend.canned_path = file.canned_path;
        }
    }

    if let Some(v) = &opts.root {
        cfg.root = v.clone();
    }
    if opts.project.is_some() {
        cfg.project = opts.project.clone();
    }
    if !opts.exclude.is_empty() {
        cfg.exclude = opts.exclude.clone();
    }
    if let Some(v) = &opts.dataset {
        cfg.dataset = v.clone();
    }
    if let Some(v) = &opts.callgraph {
        cfg.callgraph_path = v.clone();
    }
    if let Some(v) = &opts.loggraph {
        cfg.loggraph_path = v.clone();
    }
    if let Some(v) = &opts.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = opts.hops {
        cfg.hops = v;
    }
    if let Some(v) = opts.k_examples {
        cfg.k_examples = v;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if !opts.ablations.is_empty() {
        ablation_flags = opts.ablations.clone();
    }
    if opts.limit.is_some() {
        cfg.limit = opts.limit;
    }
    if opts.dump_prompts.is_some() {
        cfg.dump_prompts = opts.dump_prompts.clone();
    }
    if opts.keep_infeasible {
        cfg.filter_infeasible = false;
    }
    if let Some(v) = &opts.backend {
        backend.kind = parse_backend_kind(v)?;
    }
    if let Some(v) = &opts.base_url {
        backend.base_url = v.clone();
    }
    if let Some(v) = &opts.model {
        backend.model = v.clone();
    }
    if opts.api_key_env.is_some() {
        backend.api_key_env = opts.api_key_env.clone();
    }
    if let Some(v) = opts.temperature {
        backend.temperature = v;
    }
    if let Some(v) = opts.max_retries {
        backend.max_retries = v;
    }
    if let Some(v) = opts.request_timeout_ms {
        backend.request_timeout_ms = v;
    }
    if let Some(v) = opts.max_concurrent_requests {
        backend.max_concurrent_requests = v;
    }
    if opts.canned_path.is_some() {
        backend.canned_path = opts.canned_path.clone();
    }

    cfg.ablations =
        Ablations::from_flags(&ablation_flags).map_err(|e| CliFailure::config(e.to_string()))?;
    cfg.backend = backend;
    cfg.build = build;
    Ok(cfg)
}

fn print_report(report: &logsmith::evalkit::EvalReport, out_dir: &std::path::Path) {
    println!("project                {}", report.project);
    println!(
        "samples                {} ({} scored beyond position)",
        report.n_samples, report.n_counted
    );
    let rows = [
        ("PA", report.pa),
        ("L-ACC", report.l_acc),
        ("AOD", report.aod),
        ("Precision", report.precision),
        ("Recall", report.recall),
        ("F1", report.f1),
        ("BLEU-1", report.bleu1),
        ("BLEU-4", report.bleu4),
        ("ROUGE-1", report.rouge1),
        ("ROUGE-L", report.rouge_l),
    ];
    for (name, value) in rows {
        println!("{name:<22} {value:.4}");
    }
    let ablations = if report.ablations.is_empty() {
        "(none)".to_string()
    } else {
        report.ablations.join(", ")
    };
    println!("ablations              {ablations}");
    println!("backend                {}", report.backend);
    println!("seed                   {}", report.seed);
    println!("report written to      {}", report_path(out_dir).display());
}

fn dispatch(command: Command) -> Result<(), CliFailure> {
    match command {
        Command::Ingest(opts) => {
            let cfg = resolve_config(&opts, false)?;
            let outcome = pipeline::ingest(&cfg)?;
            println!("dataset                {}", cfg.dataset.display());
            println!("files                  {}", outcome.meta.n_files);
            println!("methods                {}", outcome.meta.n_methods);
            println!("logged methods         {}", outcome.meta.n_logged_methods);
            println!(
                "samples                {} ({} train / {} test)",
                outcome.meta.n_samples,
                outcome.meta.n_train_samples,
                outcome.meta.n_test_samples
            );
            println!(
                "skipped                {} non-removable, {} duplicate text",
                outcome.skipped_nonremovable, outcome.skipped_duplicate_text
            );
            Ok(())
        }
        Command::Analyze { graph } => match graph {
            AnalyzeCommand::Callgraph(opts) => {
                let cfg = resolve_config(&opts, false)?;
                let meta = read_meta_for(&cfg)?;
                let index = pipeline::rescan(&meta)?;
                let callgraph = build_call_graph(&index);
                callgraph.write_json(&cfg.callgraph_path).map_err(PipelineError::from)?;
                println!("call graph             {}", cfg.callgraph_path.display());
                println!("methods                {}", callgraph.nodes().count());
                println!("edges                  {}", callgraph.edge_count());
                println!("unresolved call sites  {}", callgraph.unresolved_calls);
                Ok(())
            }
            AnalyzeCommand::Loggraph(opts) => {
                let cfg = resolve_config(&opts, false)?;
                let meta = read_meta_for(&cfg)?;
                let index = pipeline::rescan(&meta)?;
                let callgraph = if cfg.callgraph_path.is_file() {
                    CallGraph::read_json(&cfg.callgraph_path).map_err(PipelineError::from)?
                } else {
                    build_call_graph(&index)
                };
                let base = build_log_graph(&index, &callgraph);
                let loggraph = if cfg.filter_infeasible {
                    filter_constant_false_paths(&base, &index, &callgraph)
                } else {
                    base
                };
                loggraph.write_json(&cfg.loggraph_path).map_err(PipelineError::from)?;
                println!("log graph              {}", cfg.loggraph_path.display());
                println!("log statements         {}", loggraph.node_count());
                println!("edges                  {}", loggraph.edge_count());
                println!("pruned methods         {}", loggraph.pruned_methods().count());
                Ok(())
            }
        },
        Command::Retrieve(opts) => {
            let cfg = resolve_config(&opts, false)?;
            let ranked = pipeline::retrieve(&cfg)?;
            println!("retrieval              {}", retrieval_path(&cfg.out_dir).display());
            println!("queries ranked         {}", ranked.len());
            Ok(())
        }
        Command::Generate(opts) => {
            let cfg = resolve_config(&opts, false)?;
            let records = pipeline::generate(&cfg)?;
            let failures = records.iter().filter(|r| r.final_log.is_none()).count();
            println!(
                "generations            {}",
                pipeline::generations_path(&cfg.out_dir).display()
            );
            println!("samples generated      {}", records.len());
            println!("parse failures         {failures}");
            Ok(())
        }
        Command::Evaluate(opts) => {
            let cfg = resolve_config(&opts, false)?;
            let (report, _) = pipeline::evaluate(&cfg)?;
            print_report(&report, &cfg.out_dir);
            Ok(())
        }
        Command::Run { build, opts } => {
            let cfg = resolve_config(&opts, build)?;
            let report = pipeline::run(&cfg)?;
            print_report(&report, &cfg.out_dir);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
