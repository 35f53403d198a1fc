//! Integration tests over the committed Java fixture in
//! `tests/fixtures/mini_corpus`. The two `expected_*.json` files next to it
//! were derived by hand from the Java sources; nothing in this suite
//! regenerates them from the code under test.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use logsmith::callgraph::{build_call_graph, code_slice, CallGraph, Relation};
use logsmith::corpus::{
    build_samples, normalize_ws, reinserted_method, scan_project, CorpusConfig, ProjectIndex,
    Sample,
};
use logsmith::loggraph::{
    build_log_graph, filter_constant_false_paths, log_slice, node_id, LogGraph, LogSlice,
};
use logsmith::modelgw::decompose_statement;
use logsmith::promptkit::{build_contextualized_prompt, Ablations};
use logsmith::retrieval::{top_k, Bm25Index, DEFAULT_B, DEFAULT_K1};
use logsmith::scopevars::{base_identifier, collect_scope_variables};

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_corpus")
}

fn mini_config() -> CorpusConfig {
    CorpusConfig {
        project: Some("minicorpus".to_string()),
        exclude: vec!["**/test/**".to_string()],
        ..CorpusConfig::default()
    }
}

fn mini_index() -> ProjectIndex {
    scan_project(&fixture_root(), &mini_config()).expect("fixture scans")
}

fn expected_adjacency() -> BTreeMap<String, BTreeSet<String>> {
    let raw = std::fs::read_to_string(fixture_root().join("expected_callgraph.json")).unwrap();
    serde_json::from_str(&raw).unwrap()
}

fn expected_log_nodes() -> Vec<(String, String)> {
    let raw = std::fs::read_to_string(fixture_root().join("expected_log_nodes.json")).unwrap();
    let entries: Vec<serde_json::Value> = serde_json::from_str(&raw).unwrap();
    entries
        .into_iter()
        .map(|e| {
            (
                e["id"].as_str().unwrap().to_string(),
                e["level"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn scan_indexes_exactly_the_fifteen_production_files() {
    let index = mini_index();
    assert_eq!(index.files.len(), 15, "files under **/test/** must be excluded");
    assert!(index.files.iter().all(|f| f.parse_ok));
    assert!(
        index.methods.iter().all(|m| !m.id.contains("Probe")),
        "probe classes leaked into the index"
    );
    let total_logs: usize = index
        .methods
        .iter()
        .map(|m| m.logging_statements.len())
        .sum();
    assert_eq!(total_logs, 49);
}

#[test]
fn call_graph_equals_hand_derived_adjacency() {
    let index = mini_index();
    let graph = build_call_graph(&index);
    let mut got: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (caller, entries) in graph.to_adjacency() {
        let callees: BTreeSet<String> = entries.into_iter().map(|e| e.callee).collect();
        got.insert(caller, callees);
    }
    let want = expected_adjacency();
    for (caller, callees) in &want {
        assert_eq!(
            got.get(caller),
            Some(callees),
            "adjacency mismatch for {caller}"
        );
    }
    assert_eq!(got, want, "extra or missing call-graph nodes");
}

#[test]
fn log_graph_nodes_equal_hand_enumerated_statements() {
    let index = mini_index();
    let cg = build_call_graph(&index);
    let lg = build_log_graph(&index, &cg);

    let want = expected_log_nodes();
    let got: Vec<(String, String)> = lg
        .nodes()
        .map(|n| (n.id.clone(), n.level.as_str().to_string()))
        .collect();
    assert_eq!(got, want);

    // No node may come from a method without logging statements.
    let logged_methods: BTreeSet<&str> = index
        .methods
        .iter()
        .filter(|m| !m.logging_statements.is_empty())
        .map(|m| m.id.as_str())
        .collect();
    for node in lg.nodes() {
        assert!(
            logged_methods.contains(node.method.as_str()),
            "node {} points at a log-free method",
            node.id
        );
    }

    // Infeasible-path filtering may only drop edges, never nodes.
    let filtered = filter_constant_false_paths(&lg, &index, &cg);
    let filtered_ids: Vec<&str> = filtered.nodes().map(|n| n.id.as_str()).collect();
    let base_ids: Vec<&str> = lg.nodes().map(|n| n.id.as_str()).collect();
    assert_eq!(filtered_ids, base_ids);
    let base_edges: BTreeSet<(String, String)> = lg
        .edges()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    for (a, b) in filtered.edges() {
        assert!(base_edges.contains(&(a.to_string(), b.to_string())));
    }
}

/// Neighbor maps rebuilt from the serialized call-graph JSON, so the slice
/// check does not lean on the in-memory graph it is judging.
struct CgDump {
    forward: BTreeMap<String, BTreeSet<String>>,
    reverse: BTreeMap<String, BTreeSet<String>>,
}

impl CgDump {
    fn load(path: &Path) -> CgDump {
        let raw = std::fs::read_to_string(path).unwrap();
        let adjacency: BTreeMap<String, Vec<serde_json::Value>> =
            serde_json::from_str(&raw).unwrap();
        let mut forward: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut reverse: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (caller, entries) in adjacency {
            forward.entry(caller.clone()).or_default();
            for e in entries {
                let callee = e["callee"].as_str().unwrap().to_string();
                forward
                    .entry(caller.clone())
                    .or_default()
                    .insert(callee.clone());
                reverse.entry(callee).or_default().insert(caller.clone());
            }
        }
        CgDump { forward, reverse }
    }

    fn callers(&self, id: &str) -> BTreeSet<String> {
        self.reverse.get(id).cloned().unwrap_or_default()
    }

    fn callees(&self, id: &str) -> BTreeSet<String> {
        self.forward.get(id).cloned().unwrap_or_default()
    }
}

/// Replays one direction of a code slice: every pick must be an unvisited
/// neighbor of the previous link, hops must count up from 1, and the walk
/// may only stop early when every candidate was already visited.
fn check_code_slice_side(
    dump: &CgDump,
    target: &str,
    picks: &[&str],
    hops: u8,
    visited: &mut BTreeSet<String>,
    backward: bool,
) {
    let mut cursor = target.to_string();
    for pick in picks {
        let neighbors = if backward {
            dump.callers(&cursor)
        } else {
            dump.callees(&cursor)
        };
        assert!(
            neighbors.contains(*pick),
            "{pick} is not a {} neighbor of {cursor}",
            if backward { "caller" } else { "callee" }
        );
        assert!(!visited.contains(*pick), "{pick} visited twice");
        visited.insert(pick.to_string());
        cursor = pick.to_string();
    }
    if picks.len() < hops as usize {
        let neighbors = if backward {
            dump.callers(&cursor)
        } else {
            dump.callees(&cursor)
        };
        let open: Vec<&String> = neighbors.iter().filter(|n| !visited.contains(*n)).collect();
        assert!(
            open.is_empty(),
            "walk from {target} stopped early with open neighbors {open:?}"
        );
    }
}

#[test]
fn code_slices_agree_with_independent_path_oracle() {
    let index = mini_index();
    let graph = build_call_graph(&index);
    let dir = tempfile::tempdir().unwrap();
    let cg_path = dir.path().join("callgraph.json");
    graph.write_json(&cg_path).unwrap();
    let dump = CgDump::load(&cg_path);

    let mut checked = 0usize;
    for method in &index.methods {
        for seed in [1u64, 2, 42] {
            let slice = code_slice(&graph, &index, &method.id, 2, seed);
            let callers: Vec<&str> = slice
                .chain
                .iter()
                .filter(|e| e.relation == Relation::CalledBy)
                .map(|e| e.method_id.as_str())
                .collect();
            let callees: Vec<&str> = slice
                .chain
                .iter()
                .filter(|e| e.relation == Relation::Calls)
                .map(|e| e.method_id.as_str())
                .collect();
            for (i, entry) in slice
                .chain
                .iter()
                .filter(|e| e.relation == Relation::CalledBy)
                .enumerate()
            {
                assert_eq!(entry.hop as usize, i + 1, "caller hops must count up");
            }
            for (i, entry) in slice
                .chain
                .iter()
                .filter(|e| e.relation == Relation::Calls)
                .enumerate()
            {
                assert_eq!(entry.hop as usize, i + 1, "callee hops must count up");
            }
            let mut visited: BTreeSet<String> = BTreeSet::from([method.id.clone()]);
            check_code_slice_side(&dump, &method.id, &callers, 2, &mut visited, true);
            check_code_slice_side(&dump, &method.id, &callees, 2, &mut visited, false);
            checked += 1;
        }
    }
    assert_eq!(checked, index.methods.len() * 3);
}

/// Log-graph view rebuilt from the serialized JSON dump.
struct LgDump {
    method_of: BTreeMap<String, String>,
    succ: BTreeMap<String, BTreeSet<String>>,
    pred: BTreeMap<String, BTreeSet<String>>,
    anchors: BTreeMap<String, (Vec<String>, Vec<String>)>,
}

impl LgDump {
    fn load(path: &Path) -> LgDump {
        let raw = std::fs::read_to_string(path).unwrap();
        let dump: serde_json::Value = serde_json::from_str(&raw).unwrap();
        let mut method_of = BTreeMap::new();
        for n in dump["nodes"].as_array().unwrap() {
            method_of.insert(
                n["id"].as_str().unwrap().to_string(),
                n["method"].as_str().unwrap().to_string(),
            );
        }
        let mut succ: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut pred: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in dump["edges"].as_array().unwrap() {
            let from = e[0].as_str().unwrap().to_string();
            let to = e[1].as_str().unwrap().to_string();
            succ.entry(from.clone()).or_default().insert(to.clone());
            pred.entry(to).or_default().insert(from);
        }
        let mut anchors = BTreeMap::new();
        for (method, a) in dump["anchors"].as_object().unwrap() {
            let lift = |key: &str| -> Vec<String> {
                a[key]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_str().unwrap().to_string())
                    .collect()
            };
            anchors.insert(method.clone(), (lift("preceding"), lift("succeeding")));
        }
        LgDump {
            method_of,
            succ,
            pred,
            anchors,
        }
    }

    fn neighbors(&self, id: &str, backward: bool) -> BTreeSet<String> {
        let map = if backward { &self.pred } else { &self.succ };
        map.get(id).cloned().unwrap_or_default()
    }

    /// Candidate list with the excluded node replaced by whatever lies just
    /// beyond it in the walking direction, deduplicated and sorted.
    fn splice_excluded(
        &self,
        candidates: &[String],
        exclude: Option<&str>,
        backward: bool,
    ) -> Vec<String> {
        let Some(excluded) = exclude else {
            return candidates.to_vec();
        };
        let mut out = BTreeSet::new();
        for c in candidates {
            if c == excluded {
                out.extend(
                    self.neighbors(c, backward)
                        .into_iter()
                        .filter(|b| b != excluded),
                );
            } else {
                out.insert(c.clone());
            }
        }
        out.into_iter().collect()
    }
}

/// Replays one side of a log slice against the serialized graph: each pick
/// must come from the live candidate set, train-set logs take precedence
/// whenever one is available, and early stops require an empty candidate
/// set.
fn check_log_slice_side(
    dump: &LgDump,
    first: &[String],
    picks: &[&str],
    hops: u8,
    train: &BTreeSet<String>,
    exclude: Option<&str>,
    backward: bool,
) {
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut candidates = dump.splice_excluded(first, exclude, backward);
    let mut step = 0usize;
    loop {
        candidates.retain(|c| !taken.contains(c));
        if step == hops as usize || candidates.is_empty() {
            break;
        }
        let Some(pick) = picks.get(step) else {
            panic!("walker stopped at step {step} with candidates {candidates:?}");
        };
        assert!(
            candidates.iter().any(|c| c == pick),
            "pick {pick} not in candidate set {candidates:?}"
        );
        let train_available = candidates
            .iter()
            .any(|c| dump.method_of.get(c).is_some_and(|m| train.contains(m)));
        if train_available {
            let picked_method = dump.method_of.get(*pick).unwrap();
            assert!(
                train.contains(picked_method),
                "pick {pick} ignored an available train-set candidate"
            );
        }
        taken.insert(pick.to_string());
        let next = dump.neighbors(pick, backward);
        let next: Vec<String> = next.into_iter().collect();
        candidates = dump.splice_excluded(&next, exclude, backward);
        step += 1;
    }
    assert_eq!(
        picks.len(),
        step,
        "walker picked a different number of nodes than the oracle allows"
    );
}

fn verify_log_slice(
    dump: &LgDump,
    slice: &LogSlice,
    target: &str,
    hops: u8,
    train: &BTreeSet<String>,
    exclude: Option<&str>,
) {
    let (preceding, succeeding) = dump
        .anchors
        .get(target)
        .cloned()
        .unwrap_or((Vec::new(), Vec::new()));
    let pre_picks: Vec<&str> = slice.preceding.iter().map(|n| n.id.as_str()).collect();
    let post_picks: Vec<&str> = slice.succeeding.iter().map(|n| n.id.as_str()).collect();
    check_log_slice_side(dump, &preceding, &pre_picks, hops, train, exclude, true);
    check_log_slice_side(dump, &succeeding, &post_picks, hops, train, exclude, false);
}

#[test]
fn log_slices_agree_with_independent_path_oracle() {
    let index = mini_index();
    let cg = build_call_graph(&index);
    let lg = build_log_graph(&index, &cg);
    let dir = tempfile::tempdir().unwrap();
    let lg_path = dir.path().join("loggraph.json");
    lg.write_json(&lg_path).unwrap();
    let dump = LgDump::load(&lg_path);

    let build = build_samples(&index, 1);
    let train = build.split.train_methods.clone();

    for method in &index.methods {
        for seed in [1u64, 2, 42] {
            let slice = log_slice(&lg, &method.id, 2, &train, seed, None);
            verify_log_slice(&dump, &slice, &method.id, 2, &train, None);
        }
    }

    // Samples walk the same graph but splice their own statement out.
    for sample in &build.samples {
        let own = original_node_id(sample);
        let slice = log_slice(&lg, &sample.method_id, 2, &train, 9, Some(&own));
        verify_log_slice(&dump, &slice, &sample.method_id, 2, &train, Some(&own));
        assert!(
            slice
                .preceding
                .iter()
                .chain(slice.succeeding.iter())
                .all(|n| n.id != own),
            "sample slice leaked its own ground-truth statement"
        );
    }
}

/// Node id of the sample's removed statement in the original method,
/// recovered from the sample id suffix (`...@L<line>`).
fn original_node_id(sample: &Sample) -> String {
    let line: u32 = sample
        .sample_id
        .rsplit("@L")
        .next()
        .unwrap()
        .parse()
        .unwrap();
    node_id(&sample.method_id, line)
}

#[test]
fn gt_statements_decompose_back_to_corpus_extraction() {
    let index = mini_index();
    let mut checked = 0usize;
    for method in &index.methods {
        for log in &method.logging_statements {
            let decomposed = decompose_statement(&log.raw_text)
                .unwrap_or_else(|e| panic!("{} failed to decompose: {e}", method.id));
            assert_eq!(decomposed.level, Some(log.level), "level for {}", method.id);
            assert_eq!(
                decomposed.text_literals, log.text_literals,
                "text literals for {}",
                method.id
            );
            assert_eq!(
                decomposed.variable_exprs, log.variable_exprs,
                "variables for {}",
                method.id
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 49);
}

#[test]
fn reinsertion_reproduces_methods_modulo_whitespace() {
    let index = mini_index();
    let build = build_samples(&index, 1);
    assert!(!build.samples.is_empty());
    for sample in &build.samples {
        let method = index.method(&sample.method_id).unwrap();
        assert_eq!(
            normalize_ws(&reinserted_method(sample)),
            normalize_ws(&method.source_text),
            "reinsertion drifted for {}",
            sample.sample_id
        );
    }
}

#[test]
fn scope_sets_cover_every_gt_variable() {
    let index = mini_index();
    let build = build_samples(&index, 1);
    for sample in &build.samples {
        let method = index.method(&sample.method_id).unwrap();
        let entries = collect_scope_variables(method, &index);
        let names: BTreeSet<&str> = entries.iter().map(|v| v.name.as_str()).collect();
        for expr in &sample.gt_variables {
            let Some(base) = base_identifier(expr) else {
                continue;
            };
            // Bare calls like `total()` name a method, not a variable.
            if expr.trim().starts_with(&format!("{base}(")) {
                continue;
            }
            assert!(
                names.contains(base),
                "{}: variable base {base} (from {expr}) missing from scope set {names:?}",
                sample.sample_id
            );
        }
    }
}

#[test]
fn sample_split_is_deterministic_and_respects_removability() {
    let index = mini_index();
    let a = build_samples(&index, 5);
    let b = build_samples(&index, 5);
    let ids = |s: &[Sample]| -> Vec<String> { s.iter().map(|x| x.sample_id.clone()).collect() };
    assert_eq!(ids(&a.samples), ids(&b.samples));
    assert_eq!(a.split.train_methods, b.split.train_methods);
    assert_eq!(a.split.test_methods, b.split.test_methods);

    // The braceless-if statement is the only non-removable log.
    assert_eq!(a.skipped_nonremovable, 1);
    assert_eq!(a.skipped_duplicate_text, 0);
    assert_eq!(a.samples.len(), 48);
    assert!(a
        .samples
        .iter()
        .all(|s| s.method_id != "mc.net.Router#choose(String)"));

    // Logs inside constant-false branches still become samples.
    assert!(a
        .samples
        .iter()
        .any(|s| s.method_id == "mc.util.Retry#burst()"));
}

#[test]
fn prompts_run_shorter_than_source_files_for_most_samples() {
    let index = mini_index();
    let cg = build_call_graph(&index);
    let lg = build_log_graph(&index, &cg);
    let build = build_samples(&index, 1);
    let bm25 = Bm25Index::build(&build.samples, DEFAULT_K1, DEFAULT_B);

    let mut shorter = 0usize;
    for sample in &build.samples {
        let method = index.method(&sample.method_id).unwrap();
        let file_chars = index.files[method.file_idx].char_count as usize;
        let code = code_slice(&cg, &index, &sample.method_id, 2, 7);
        let own = original_node_id(sample);
        let log = log_slice(&lg, &sample.method_id, 2, &build.split.train_methods, 7, Some(&own));
        let vars = collect_scope_variables(method, &index);
        let examples = top_k(&bm25, &sample.method_source, 5).unwrap();
        let prompt =
            build_contextualized_prompt(sample, &code, &log, &vars, &examples, Ablations::default());
        if prompt.rendered.chars().count() < file_chars {
            shorter += 1;
        }
    }
    let fraction = shorter as f64 / build.samples.len() as f64;
    assert!(
        fraction >= 0.5,
        "only {shorter}/{} prompts were shorter than their source file",
        build.samples.len()
    );
}

#[test]
fn graphs_round_trip_through_their_json_dumps() {
    let index = mini_index();
    let cg = build_call_graph(&index);
    let lg = build_log_graph(&index, &cg);
    let dir = tempfile::tempdir().unwrap();

    let cg_path = dir.path().join("cg.json");
    cg.write_json(&cg_path).unwrap();
    let cg2 = CallGraph::read_json(&cg_path).unwrap();
    assert_eq!(cg.to_adjacency(), cg2.to_adjacency());

    let lg_path = dir.path().join("lg.json");
    lg.write_json(&lg_path).unwrap();
    let lg2 = LogGraph::read_json(&lg_path).unwrap();
    let nodes = |g: &LogGraph| -> Vec<String> { g.nodes().map(|n| n.id.clone()).collect() };
    let edges = |g: &LogGraph| -> Vec<(String, String)> {
        g.edges().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    };
    assert_eq!(nodes(&lg), nodes(&lg2));
    assert_eq!(edges(&lg), edges(&lg2));
}
