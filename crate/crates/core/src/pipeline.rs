//! End-to-end orchestration: ingest a corpus, build the graphs, retrieve
//! examples, prompt a backend twice per sample, and score the results.
//!
//! Each stage reads and writes plain files so it can run (and be tested)
//! on its own. A full run is just the stages in order against one
//! configuration.

use crate::callgraph::{build_call_graph, code_slice, CallGraph, CallGraphError};
use crate::corpus::{
    self, read_dataset, read_meta, scan_project, write_dataset, CorpusConfig, CorpusError,
    DatasetMeta, ProjectIndex, Sample, Split,
};
use crate::evalkit::{
    aggregate_report, evaluate_sample, write_csv, EvalError, EvalReport, ReportMeta, SampleEval,
};
use crate::loggraph::{
    build_log_graph, filter_constant_false_paths, log_slice, node_id, LogGraph, LogGraphError,
};
use crate::modelgw::{
    parse_generation, Backend, BackendConfig, BackendKind, CompletionRequest, GatewayError,
    GeneratedLog, Stage,
};
use crate::promptkit::{
    build_contextualized_prompt, build_refinement_prompt, prompt_file_name, Ablations, PromptError,
    PromptBundle,
};
use crate::retrieval::{top_k, Bm25Index, RetrievalError, StyleExample, DEFAULT_B, DEFAULT_K1};
use crate::scopevars::{
    base_identifier, collect_scope_variables, resolve_class_definition, resolve_variable_type,
    TypeDefinition,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const DEFAULT_HOPS: u8 = 2;
pub const DEFAULT_K_EXAMPLES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    CallGraph(#[from] CallGraphError),
    #[error(transparent)]
    LogGraph(#[from] LogGraphError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
        move |source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Everything one run needs. Stage subcommands use the subset of fields
/// they care about; paths tie the stages together.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Corpus root scanned during ingestion.
    pub root: PathBuf,
    /// Project name recorded on samples; defaults to the root's dir name.
    pub project: Option<String>,
    /// Glob patterns excluded from the scan.
    pub exclude: Vec<String>,
    pub dataset: PathBuf,
    pub callgraph_path: PathBuf,
    pub loggraph_path: PathBuf,
    pub out_dir: PathBuf,
    pub backend: BackendConfig,
    pub hops: u8,
    pub k_examples: usize,
    pub seed: u64,
    pub ablations: Ablations,
    /// Evaluate only the first N test samples (by id); a budget valve for
    /// live backends.
    pub limit: Option<usize>,
    /// Directory for rendered-prompt dumps; `None` skips dumping.
    pub dump_prompts: Option<PathBuf>,
    /// Drop log-graph paths that only exist through constant-false
    /// branches.
    pub filter_infeasible: bool,
    /// Run ingestion and analysis before generating, instead of expecting
    /// their outputs on disk.
    pub build: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            root: PathBuf::from("."),
            project: None,
            exclude: Vec::new(),
            dataset: PathBuf::from("out/dataset.jsonl"),
            callgraph_path: PathBuf::from("out/callgraph.json"),
            loggraph_path: PathBuf::from("out/loggraph.json"),
            out_dir: PathBuf::from("out"),
            backend: BackendConfig::default(),
            hops: DEFAULT_HOPS,
            k_examples: DEFAULT_K_EXAMPLES,
            seed: 1,
            ablations: Ablations::default(),
            limit: None,
            dump_prompts: None,
            filter_infeasible: true,
            build: false,
        }
    }
}

/// Rejects configurations no stage could honor.
pub fn validate(cfg: &RunConfig) -> Result<(), PipelineError> {
    if !(1..=9).contains(&cfg.k_examples) {
        return Err(PipelineError::Config(format!(
            "k_examples must be between 1 and 9, got {}",
            cfg.k_examples
        )));
    }
    if cfg.backend.kind == BackendKind::Http
        && (cfg.backend.base_url.is_empty() || cfg.backend.model.is_empty())
    {
        return Err(PipelineError::Config(
            "http backend requires base_url and model".to_string(),
        ));
    }
    if cfg.backend.kind == BackendKind::MockCanned && cfg.backend.canned_path.is_none() {
        return Err(PipelineError::Config(
            "mock-canned backend requires canned_path".to_string(),
        ));
    }
    Ok(())
}

fn corpus_config(project: Option<String>, exclude: Vec<String>) -> CorpusConfig {
    CorpusConfig {
        project,
        exclude,
        ..CorpusConfig::default()
    }
}

/// Counts reported after ingestion, mirroring the dataset sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct IngestOutcome {
    pub meta: DatasetMeta,
    pub skipped_nonremovable: u32,
    pub skipped_duplicate_text: u32,
}

/// Scans the corpus, carves samples, splits them, and writes the dataset
/// with its metadata sidecar.
pub fn ingest(cfg: &RunConfig) -> Result<IngestOutcome, PipelineError> {
    let corpus_cfg = corpus_config(cfg.project.clone(), cfg.exclude.clone());
    let index = scan_project(&cfg.root, &corpus_cfg)?;
    let build = corpus::build_samples(&index, cfg.seed);
    let meta = DatasetMeta {
        schema_version: 1,
        project: index.project.clone(),
        root: index.root.clone(),
        exclude: cfg.exclude.clone(),
        seed: cfg.seed,
        n_files: index.files.len(),
        n_methods: index.methods.len(),
        n_logged_methods: index
            .methods
            .iter()
            .filter(|m| !m.logging_statements.is_empty())
            .count(),
        n_samples: build.samples.len(),
        n_train_samples: build
            .samples
            .iter()
            .filter(|s| s.split == Split::Train)
            .count(),
        n_test_samples: build
            .samples
            .iter()
            .filter(|s| s.split == Split::Test)
            .count(),
    };
    write_dataset(&cfg.dataset, &build.samples, &meta)?;
    Ok(IngestOutcome {
        meta,
        skipped_nonremovable: build.skipped_nonremovable,
        skipped_duplicate_text: build.skipped_duplicate_text,
    })
}

/// Rescans the corpus a dataset was carved from, using the recorded root
/// and exclusions so later stages see the same classes and methods.
pub fn rescan(meta: &DatasetMeta) -> Result<ProjectIndex, PipelineError> {
    let corpus_cfg = corpus_config(Some(meta.project.clone()), meta.exclude.clone());
    Ok(scan_project(&meta.root, &corpus_cfg)?)
}

#[derive(Debug)]
pub struct AnalyzeOutcome {
    pub callgraph: CallGraph,
    pub loggraph: LogGraph,
}

/// Builds both graphs from the dataset's corpus and writes them to the
/// configured paths.
pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeOutcome, PipelineError> {
    let meta = read_meta(&cfg.dataset)?;
    let index = rescan(&meta)?;
    let callgraph = build_call_graph(&index);
    callgraph.write_json(&cfg.callgraph_path)?;
    let base = build_log_graph(&index, &callgraph);
    let loggraph = if cfg.filter_infeasible {
        filter_constant_false_paths(&base, &index, &callgraph)
    } else {
        base
    };
    loggraph.write_json(&cfg.loggraph_path)?;
    Ok(AnalyzeOutcome {
        callgraph,
        loggraph,
    })
}

fn load_or_build_graphs(
    cfg: &RunConfig,
    index: &ProjectIndex,
) -> Result<(CallGraph, LogGraph), PipelineError> {
    let callgraph = if cfg.callgraph_path.is_file() {
        CallGraph::read_json(&cfg.callgraph_path)?
    } else {
        build_call_graph(index)
    };
    let loggraph = if cfg.loggraph_path.is_file() {
        LogGraph::read_json(&cfg.loggraph_path)?
    } else {
        let base = build_log_graph(index, &callgraph);
        if cfg.filter_infeasible {
            filter_constant_false_paths(&base, index, &callgraph)
        } else {
            base
        }
    };
    Ok((callgraph, loggraph))
}

/// One line of the generation artifact: what the model produced for a
/// sample after both stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample_id: String,
    /// First-stage result; `None` when the response never parsed.
    pub tentative: Option<GeneratedLog>,
    /// What evaluation scores: the refined statement when refinement ran
    /// and parsed, otherwise the tentative one.
    #[serde(rename = "final")]
    pub final_log: Option<GeneratedLog>,
    pub tentative_parse_failed: bool,
    pub refined_parse_failed: bool,
}

/// One completion call, recorded for audit and replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub sample_id: String,
    pub stage: Stage,
    pub prompt_sha256: String,
    pub raw_response: String,
}

/// Reads the metadata sidecar of the configured dataset.
pub fn read_meta_for(cfg: &RunConfig) -> Result<DatasetMeta, PipelineError> {
    Ok(read_meta(&cfg.dataset)?)
}

pub fn generations_path(out_dir: &Path) -> PathBuf {
    out_dir.join("generations.jsonl")
}

pub fn retrieval_path(out_dir: &Path) -> PathBuf {
    out_dir.join("retrieval.json")
}

/// A ranked example reference: enough to audit retrieval without copying
/// method bodies into the artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedExample {
    pub sample_id: String,
    pub score: f64,
}

/// Ranks style examples for every test sample and writes the result as
/// one JSON map keyed by sample id.
pub fn retrieve(cfg: &RunConfig) -> Result<BTreeMap<String, Vec<RankedExample>>, PipelineError> {
    validate(cfg)?;
    let samples = read_dataset(&cfg.dataset)?;
    let bm25 = Bm25Index::build(&samples, DEFAULT_K1, DEFAULT_B);
    let mut ranked = BTreeMap::new();
    for sample in test_targets(&samples, cfg.limit) {
        let hits = top_k(&bm25, &sample.method_source, cfg.k_examples)?;
        ranked.insert(
            sample.sample_id.clone(),
            hits.into_iter()
                .map(|h| RankedExample {
                    sample_id: h.sample_id,
                    score: h.score,
                })
                .collect(),
        );
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(PipelineError::io(&cfg.out_dir))?;
    let path = retrieval_path(&cfg.out_dir);
    let body = serde_json::to_string_pretty(&ranked).expect("rankings serialize");
    std::fs::write(&path, body).map_err(PipelineError::io(&path))?;
    Ok(ranked)
}

pub fn transcripts_path(out_dir: &Path) -> PathBuf {
    out_dir.join("transcripts.jsonl")
}

pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.json")
}

pub fn per_sample_path(out_dir: &Path) -> PathBuf {
    out_dir.join("per_sample.csv")
}

fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Type definitions for the variables a tentative statement used, one per
/// distinct project-internal type, sorted by type name. External types
/// and unresolvable expressions contribute nothing.
fn refinement_type_defs(
    tentative: &GeneratedLog,
    method_id: &str,
    index: &ProjectIndex,
) -> Vec<TypeDefinition> {
    let Some(method) = index.method(method_id) else {
        return Vec::new();
    };
    let mut defs: BTreeMap<String, TypeDefinition> = BTreeMap::new();
    for expr in &tentative.variable_exprs {
        let Some(base) = base_identifier(expr) else {
            continue;
        };
        let Ok(type_name) = resolve_variable_type(base, method, index) else {
            continue;
        };
        let Ok(def) = resolve_class_definition(&type_name, index) else {
            continue;
        };
        defs.entry(def.type_name.clone()).or_insert(def);
    }
    defs.into_values().collect()
}

struct SampleWork {
    record: GenerationRecord,
    transcripts: Vec<TranscriptRow>,
    prompts: Vec<(String, String)>,
}

struct GenContext<'a> {
    cfg: &'a RunConfig,
    index: &'a ProjectIndex,
    callgraph: &'a CallGraph,
    loggraph: &'a LogGraph,
    bm25: Option<&'a Bm25Index>,
    train_methods: &'a BTreeSet<String>,
    backend: &'a Backend,
}

fn generate_one(ctx: &GenContext<'_>, sample: &Sample) -> Result<SampleWork, PipelineError> {
    let cfg = ctx.cfg;
    let sample_seed = cfg.seed ^ fnv1a(&sample.sample_id);
    if ctx.index.method(&sample.method_id).is_none() {
        return Err(PipelineError::Config(format!(
            "dataset and corpus disagree: method {} not found; re-run ingestion",
            sample.method_id
        )));
    }
    let method = ctx.index.method(&sample.method_id).expect("checked above");

    let code = code_slice(ctx.callgraph, ctx.index, &sample.method_id, cfg.hops, sample_seed);
    let own_node = node_id(&sample.method_id, sample.gt_line);
    let logs = log_slice(
        ctx.loggraph,
        &sample.method_id,
        cfg.hops,
        ctx.train_methods,
        sample_seed,
        Some(&own_node),
    );
    let variables = collect_scope_variables(method, ctx.index);
    let examples: Vec<StyleExample> = match ctx.bm25 {
        Some(bm25) => top_k(bm25, &sample.method_source, cfg.k_examples)?,
        None => Vec::new(),
    };
    let prompt = build_contextualized_prompt(
        sample,
        &code,
        &logs,
        &variables,
        &examples,
        cfg.ablations,
    );

    let mut work = SampleWork {
        record: GenerationRecord {
            sample_id: sample.sample_id.clone(),
            tentative: None,
            final_log: None,
            tentative_parse_failed: false,
            refined_parse_failed: false,
        },
        transcripts: Vec::new(),
        prompts: Vec::new(),
    };

    let raw = complete_stage(ctx, sample, &prompt, Stage::Tentative, &mut work)?;
    let tentative = match parse_generation(&raw) {
        Ok(parsed) => GeneratedLog::from_parsed(&sample.sample_id, Stage::Tentative, &parsed),
        Err(_) => {
            work.record.tentative_parse_failed = true;
            return Ok(work);
        }
    };
    work.record.tentative = Some(tentative.clone());

    if cfg.ablations.no_refine {
        work.record.final_log = Some(tentative);
        return Ok(work);
    }

    let defs = refinement_type_defs(&tentative, &sample.method_id, ctx.index);
    let refine_prompt = build_refinement_prompt(sample, &tentative, &defs);
    let raw = complete_stage(ctx, sample, &refine_prompt, Stage::Refined, &mut work)?;
    work.record.final_log = match parse_generation(&raw) {
        Ok(parsed) => Some(GeneratedLog::from_parsed(
            &sample.sample_id,
            Stage::Refined,
            &parsed,
        )),
        Err(_) => {
            // Refinement only ever corrects; a garbled second answer
            // leaves the draft standing.
            work.record.refined_parse_failed = true;
            Some(tentative)
        }
    };
    Ok(work)
}

fn complete_stage(
    ctx: &GenContext<'_>,
    sample: &Sample,
    prompt: &PromptBundle,
    stage: Stage,
    work: &mut SampleWork,
) -> Result<String, PipelineError> {
    if ctx.cfg.dump_prompts.is_some() {
        work.prompts.push((
            prompt_file_name(&sample.sample_id, stage),
            prompt.rendered.clone(),
        ));
    }
    let request = CompletionRequest {
        sample_id: sample.sample_id.clone(),
        prompt: prompt.rendered.clone(),
        echo: Some((sample.gt_line, sample.gt_statement.clone())),
    };
    let raw = ctx.backend.complete(&request)?;
    work.transcripts.push(TranscriptRow {
        sample_id: sample.sample_id.clone(),
        stage,
        prompt_sha256: sha256_hex(&prompt.rendered),
        raw_response: raw.clone(),
    });
    Ok(raw)
}

/// Test samples in id order, truncated to the configured limit.
fn test_targets(samples: &[Sample], limit: Option<usize>) -> Vec<&Sample> {
    let mut targets: Vec<&Sample> = samples.iter().filter(|s| s.split == Split::Test).collect();
    targets.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    if let Some(limit) = limit {
        targets.truncate(limit);
    }
    targets
}

/// Runs both generation stages for every test sample and writes the
/// generation and transcript artifacts. Distinct samples run concurrently
/// up to the backend's request budget; outputs are ordered by sample id
/// regardless of completion order.
pub fn generate(cfg: &RunConfig) -> Result<Vec<GenerationRecord>, PipelineError> {
    validate(cfg)?;
    let samples = read_dataset(&cfg.dataset)?;
    let meta = read_meta(&cfg.dataset)?;
    let index = rescan(&meta)?;
    let (callgraph, loggraph) = load_or_build_graphs(cfg, &index)?;
    let bm25 = if cfg.ablations.no_style {
        None
    } else {
        Some(Bm25Index::build(&samples, DEFAULT_K1, DEFAULT_B))
    };
    let train_methods: BTreeSet<String> = samples
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| s.method_id.clone())
        .collect();
    let backend = Backend::from_config(&cfg.backend)?;
    let targets = test_targets(&samples, cfg.limit);

    let ctx = GenContext {
        cfg,
        index: &index,
        callgraph: &callgraph,
        loggraph: &loggraph,
        bm25: bm25.as_ref(),
        train_methods: &train_methods,
        backend: &backend,
    };

    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..targets.len()).collect());
    let results: Mutex<Vec<Option<Result<SampleWork, PipelineError>>>> =
        Mutex::new((0..targets.len()).map(|_| None).collect());
    let workers = cfg
        .backend
        .max_concurrent_requests
        .clamp(1, targets.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some(i) = next else { break };
                let outcome = generate_one(&ctx, targets[i]);
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });

    let mut records = Vec::with_capacity(targets.len());
    let mut transcripts = Vec::new();
    let mut prompts = Vec::new();
    for slot in results.into_inner().expect("results lock") {
        let work = slot.expect("every queued sample was processed")?;
        records.push(work.record);
        transcripts.extend(work.transcripts);
        prompts.extend(work.prompts);
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(PipelineError::io(&cfg.out_dir))?;
    write_jsonl(&generations_path(&cfg.out_dir), &records)?;
    write_jsonl(&transcripts_path(&cfg.out_dir), &transcripts)?;
    if let Some(dir) = &cfg.dump_prompts {
        std::fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
        for (name, text) in &prompts {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(PipelineError::io(&path))?;
        }
    }
    Ok(records)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let file = std::fs::File::create(path).map_err(PipelineError::io(path))?;
    let mut out = std::io::BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).expect("artifact rows serialize");
        writeln!(out, "{line}").map_err(PipelineError::io(path))?;
    }
    out.flush().map_err(PipelineError::io(path))?;
    Ok(())
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationRecord>, PipelineError> {
    let raw = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| {
            PipelineError::Config(format!("bad generation record on line {}: {e}", i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

fn backend_label(cfg: &BackendConfig) -> String {
    match cfg.kind {
        BackendKind::MockEcho => "mock-echo".to_string(),
        BackendKind::MockCanned => "mock-canned".to_string(),
        BackendKind::Http => format!("http:{}", cfg.model),
    }
}

/// Scores the generation artifact against the dataset and writes the
/// report and per-sample CSV. Every generated sample lands in the CSV
/// exactly once, parse failures included.
pub fn evaluate(cfg: &RunConfig) -> Result<(EvalReport, Vec<SampleEval>), PipelineError> {
    let samples = read_dataset(&cfg.dataset)?;
    let meta = read_meta(&cfg.dataset)?;
    let by_id: BTreeMap<&str, &Sample> = samples
        .iter()
        .map(|s| (s.sample_id.as_str(), s))
        .collect();
    let records = read_generations(&generations_path(&cfg.out_dir))?;
    let mut evals = Vec::with_capacity(records.len());
    for record in &records {
        let sample = by_id.get(record.sample_id.as_str()).ok_or_else(|| {
            PipelineError::Config(format!(
                "generation for unknown sample {}; dataset changed since generation",
                record.sample_id
            ))
        })?;
        evals.push(evaluate_sample(sample, record.final_log.as_ref()));
    }
    let report = aggregate_report(
        &evals,
        &ReportMeta {
            project: meta.project.clone(),
            ablations: cfg.ablations.labels(),
            backend: backend_label(&cfg.backend),
            seed: cfg.seed,
        },
    )?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(PipelineError::io(&cfg.out_dir))?;
    let report_file = report_path(&cfg.out_dir);
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_file, body).map_err(PipelineError::io(&report_file))?;
    let csv_file = per_sample_path(&cfg.out_dir);
    let file = std::fs::File::create(&csv_file).map_err(PipelineError::io(&csv_file))?;
    write_csv(&evals, file)?;
    Ok((report, evals))
}

/// The whole pipeline: optional ingest and analysis, then generation and
/// evaluation.
pub fn run(cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    validate(cfg)?;
    if cfg.build {
        ingest(cfg)?;
        analyze(cfg)?;
    }
    generate(cfg)?;
    let (report, _) = evaluate(cfg)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    const ENGINE: &str = r#"package app;

import org.slf4j.Logger;
import org.slf4j.LoggerFactory;

public class Engine {
    private static final Logger LOG = LoggerFactory.getLogger(Engine.class);
    private Store store = new Store();

    void boot(int port) {
        int bound = port;
        LOG.info("booting on " + bound);
        store.open();
    }

    void shutdown() {
        LOG.warn("shutting down");
        store.close();
    }

    void tick(long cycle) {
        if (cycle % 100 == 0) {
            LOG.debug("cycle " + cycle);
        }
        store.flush(cycle);
    }

    void reload(String reason) {
        LOG.info("reloading: " + reason);
        store.close();
        store.open();
    }

    void panic(Throwable cause) {
        LOG.error("engine failure", cause);
        shutdown();
    }

    int poll() {
        int waiting = store.pending();
        LOG.trace("polled " + waiting);
        return waiting;
    }

    void drain() {
        while (store.pending() > 0) {
            store.flush(0);
        }
        LOG.info("drained all pending work");
    }
}
"#;

    const STORE: &str = r#"package app;

import org.slf4j.Logger;
import org.slf4j.LoggerFactory;

public class Store {
    private static final Logger LOG = LoggerFactory.getLogger(Store.class);
    private int pending;

    void open() {
        pending = 0;
        LOG.info("store opened");
    }

    void close() {
        LOG.info("store closed with " + pending + " pending");
    }

    void flush(long cycle) {
        int before = pending;
        pending = 0;
        LOG.debug("flushed " + before + " at cycle " + cycle);
    }

    int pending() {
        return pending;
    }

    void compact() {
        int kept = pending / 2;
        LOG.debug("compacted to " + kept);
        pending = kept;
    }

    void audit(String who) {
        LOG.warn("audit requested by " + who);
    }
}
"#;

    fn write_corpus(dir: &Path) {
        let src = dir.join("src/main/java/app");
        fs::create_dir_all(&src).unwrap();
        fs::write(src.join("Engine.java"), ENGINE).unwrap();
        fs::write(src.join("Store.java"), STORE).unwrap();
    }

    fn config(tmp: &TempDir) -> RunConfig {
        let root = tmp.path().join("corpus");
        write_corpus(&root);
        let out = tmp.path().join("out");
        RunConfig {
            root,
            project: Some("app".to_string()),
            dataset: out.join("dataset.jsonl"),
            callgraph_path: out.join("callgraph.json"),
            loggraph_path: out.join("loggraph.json"),
            out_dir: out,
            seed: 11,
            build: true,
            ..RunConfig::default()
        }
    }

    #[test]
    fn echo_run_scores_perfectly_end_to_end() {
        let tmp = TempDir::new().unwrap();
        let cfg = config(&tmp);
        let report = run(&cfg).unwrap();
        assert!(report.n_samples >= 2, "fixture should yield several test samples");
        assert_eq!(report.pa, 1.0);
        assert_eq!(report.l_acc, 1.0);
        assert_eq!(report.aod, 1.0);
        assert_eq!((report.precision, report.recall, report.f1), (1.0, 1.0, 1.0));
        assert_eq!((report.bleu1, report.bleu4), (1.0, 1.0));
        assert_eq!((report.rouge1, report.rouge_l), (1.0, 1.0));
        assert_eq!(report.backend, "mock-echo");

        // Both stages ran for every sample.
        let transcript = fs::read_to_string(transcripts_path(&cfg.out_dir)).unwrap();
        let rows: Vec<TranscriptRow> = transcript
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rows.len(), report.n_samples * 2);
        assert!(rows.iter().any(|r| r.stage == Stage::Refined));
        assert!(rows.iter().all(|r| r.prompt_sha256.len() == 64));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let tmp = TempDir::new().unwrap();
        let cfg = config(&tmp);
        run(&cfg).unwrap();
        let report_1 = fs::read_to_string(report_path(&cfg.out_dir)).unwrap();
        let transcripts_1 = fs::read_to_string(transcripts_path(&cfg.out_dir)).unwrap();
        let csv_1 = fs::read_to_string(per_sample_path(&cfg.out_dir)).unwrap();
        run(&cfg).unwrap();
        assert_eq!(report_1, fs::read_to_string(report_path(&cfg.out_dir)).unwrap());
        assert_eq!(
            transcripts_1,
            fs::read_to_string(transcripts_path(&cfg.out_dir)).unwrap()
        );
        assert_eq!(csv_1, fs::read_to_string(per_sample_path(&cfg.out_dir)).unwrap());
    }

    #[test]
    fn canned_backend_scores_parse_failures_without_aborting() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        ingest(&cfg).unwrap();
        analyze(&cfg).unwrap();
        cfg.build = false;

        let samples = read_dataset(&cfg.dataset).unwrap();
        let targets = test_targets(&samples, None);
        assert!(targets.len() >= 2, "need at least two test samples");
        let mut canned = BTreeMap::new();
        for (i, sample) in targets.iter().enumerate() {
            let response = if i == 0 {
                "I think line 5 might be nice".to_string()
            } else {
                format!(
                    "{} {}",
                    sample.gt_line,
                    crate::modelgw::single_line(&sample.gt_statement)
                )
            };
            canned.insert(sample.sample_id.clone(), response);
        }
        let canned_path = tmp.path().join("canned.json");
        fs::write(&canned_path, serde_json::to_string(&canned).unwrap()).unwrap();
        cfg.backend.kind = BackendKind::MockCanned;
        cfg.backend.canned_path = Some(canned_path);

        let records = generate(&cfg).unwrap();
        assert_eq!(records.len(), targets.len());
        assert!(records[0].tentative_parse_failed);
        assert!(records[0].final_log.is_none());

        let (report, evals) = evaluate(&cfg).unwrap();
        assert_eq!(evals.len(), targets.len());
        let expected_pa = (targets.len() - 1) as f64 / targets.len() as f64;
        assert!((report.pa - expected_pa).abs() < 1e-12);
        assert_eq!(report.backend, "mock-canned");

        // The failed sample still holds a CSV row.
        let csv = fs::read_to_string(per_sample_path(&cfg.out_dir)).unwrap();
        assert_eq!(csv.lines().count(), targets.len() + 1);
        assert!(csv.contains(&format!("\"{}\",", records[0].sample_id))
            || csv.contains(&format!("{},", records[0].sample_id)));
    }

    #[test]
    fn ablations_change_prompts_and_skip_refinement() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        cfg.ablations = Ablations {
            no_scope: false,
            no_style: true,
            no_refine: true,
        };
        cfg.dump_prompts = Some(tmp.path().join("prompts"));
        let report = run(&cfg).unwrap();
        assert_eq!(report.pa, 1.0);
        assert_eq!(report.ablations, vec!["no-style", "no-refine"]);

        let transcript = fs::read_to_string(transcripts_path(&cfg.out_dir)).unwrap();
        let rows: Vec<TranscriptRow> = transcript
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rows.len(), report.n_samples);
        assert!(rows.iter().all(|r| r.stage == Stage::Tentative));

        let dumped: Vec<_> = fs::read_dir(tmp.path().join("prompts"))
            .unwrap()
            .map(|e| e.unwrap())
            .collect();
        assert_eq!(dumped.len(), report.n_samples);
        for entry in dumped {
            let text = fs::read_to_string(entry.path()).unwrap();
            assert!(!text.contains("### Logging examples"));
            assert!(text.contains("### Related methods"));
            assert!(text.contains("### Answer format"));
            assert!(entry.file_name().to_str().unwrap().contains(".tentative."));
        }
    }

    #[test]
    fn limit_caps_the_generated_samples() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        cfg.limit = Some(1);
        let report = run(&cfg).unwrap();
        assert_eq!(report.n_samples, 1);
        let records = read_generations(&generations_path(&cfg.out_dir)).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn bad_configurations_are_rejected_up_front() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        cfg.k_examples = 0;
        assert!(matches!(run(&cfg), Err(PipelineError::Config(_))));
        cfg.k_examples = 10;
        assert!(matches!(run(&cfg), Err(PipelineError::Config(_))));

        let mut cfg = config(&tmp);
        cfg.backend.kind = BackendKind::Http;
        assert!(matches!(validate(&cfg), Err(PipelineError::Config(_))));
    }

    #[test]
    fn missing_dataset_surfaces_as_corpus_error() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        cfg.build = false;
        cfg.dataset = tmp.path().join("nope.jsonl");
        assert!(matches!(generate(&cfg), Err(PipelineError::Corpus(_))));
    }

    #[test]
    fn retrieve_writes_rankings_for_every_test_sample() {
        let tmp = TempDir::new().unwrap();
        let mut cfg = config(&tmp);
        ingest(&cfg).unwrap();
        cfg.k_examples = 3;
        let ranked = retrieve(&cfg).unwrap();
        let samples = read_dataset(&cfg.dataset).unwrap();
        let n_test = samples.iter().filter(|s| s.split == Split::Test).count();
        assert_eq!(ranked.len(), n_test);
        for hits in ranked.values() {
            assert_eq!(hits.len(), 3);
            // Train-split documents only; scores ordered best first.
            let train: BTreeSet<&str> = samples
                .iter()
                .filter(|s| s.split == Split::Train)
                .map(|s| s.sample_id.as_str())
                .collect();
            assert!(hits.iter().all(|h| train.contains(h.sample_id.as_str())));
            assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        }
        let on_disk = fs::read_to_string(retrieval_path(&cfg.out_dir)).unwrap();
        assert!(on_disk.contains("sample_id"));
    }

    #[test]
    fn per_sample_seeds_differ_between_samples() {
        assert_ne!(fnv1a("app::a.B#c()@L2"), fnv1a("app::a.B#c()@L3"));
        assert_ne!(7 ^ fnv1a("x"), 7 ^ fnv1a("y"));
    }
}
