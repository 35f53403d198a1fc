//! Log dependency graph: which logging statement may execute right before
//! which other, with no third log in between.
//!
//! Construction prunes log-irrelevant methods (no logs, and no transitive
//! call into a logged method), folds each surviving method's control flow
//! into an interprocedural graph, and walks it from every log to the next
//! logs downstream. Loop bodies contribute a single pass (no back edges)
//! and exception edges are not modeled, so the graph over-approximates in
//! one direction only: an edge means "may precede", never "must".

use crate::callgraph::{self, CallGraph};
use crate::corpus::{FlowNode, ProjectIndex};
use crate::level::Level;
use crate::modelgw::single_line;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum LogGraphError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed graph dump {path}: {source}")]
    BadDump {
        path: std::path::PathBuf,
        source: serde_json::Error,
    },
}

/// One logging statement, globally identified as `<method id>@L<line>`
/// with the line relative to the method's first line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogNode {
    pub id: String,
    pub method: String,
    pub line: u32,
    pub level: Level,
    /// Statement text collapsed to one line, for rendering slices.
    pub text: String,
}

/// Entry-point adjacency of one method: the logs that may run last before
/// control enters it, and first once it has been entered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub preceding: Vec<String>,
    pub succeeding: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LogGraph {
    nodes: BTreeMap<String, LogNode>,
    edges: BTreeSet<(String, String)>,
    forward: BTreeMap<String, BTreeSet<String>>,
    reverse: BTreeMap<String, BTreeSet<String>>,
    anchors: BTreeMap<String, Anchor>,
    pruned_methods: BTreeSet<String>,
}

impl LogGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &LogNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&LogNode> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_string(), to.to_string()))
    }

    /// Logs that may execute right after `id`, sorted.
    pub fn successors(&self, id: &str) -> Vec<&str> {
        self.forward
            .get(id)
            .map(|s| s.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Logs that may execute right before `id`, sorted.
    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        self.reverse
            .get(id)
            .map(|s| s.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn anchor(&self, method_id: &str) -> Option<&Anchor> {
        self.anchors.get(method_id)
    }

    pub fn pruned_methods(&self) -> impl Iterator<Item = &str> {
        self.pruned_methods.iter().map(String::as_str)
    }

    pub fn is_pruned(&self, method_id: &str) -> bool {
        self.pruned_methods.contains(method_id)
    }

    fn insert_edge(&mut self, from: &str, to: &str) {
        self.edges.insert((from.to_string(), to.to_string()));
        self.forward
            .entry(from.to_string())
            .or_default()
            .insert(to.to_string());
        self.reverse
            .entry(to.to_string())
            .or_default()
            .insert(from.to_string());
    }

    pub fn write_json(&self, path: &Path) -> Result<(), LogGraphError> {
        let dump = GraphDump {
            nodes: self.nodes.values().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|(a, b)| [a.clone(), b.clone()])
                .collect(),
            anchors: self.anchors.clone(),
            pruned_methods: self.pruned_methods.iter().cloned().collect(),
        };
        let body = serde_json::to_string_pretty(&dump).expect("graph serializes");
        std::fs::write(path, body).map_err(|source| LogGraphError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self, LogGraphError> {
        let raw = std::fs::read_to_string(path).map_err(|source| LogGraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dump: GraphDump =
            serde_json::from_str(&raw).map_err(|source| LogGraphError::BadDump {
                path: path.to_path_buf(),
                source,
            })?;
        let mut graph = LogGraph {
            nodes: dump.nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
            anchors: dump.anchors,
            pruned_methods: dump.pruned_methods.into_iter().collect(),
            ..LogGraph::default()
        };
        for [from, to] in dump.edges {
            graph.insert_edge(&from, &to);
        }
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDump {
    nodes: Vec<LogNode>,
    edges: Vec<[String; 2]>,
    anchors: BTreeMap<String, Anchor>,
    pruned_methods: Vec<String>,
}

pub fn node_id(method_id: &str, line: u32) -> String {
    format!("{method_id}@L{line}")
}

/// Builds the log dependency graph over the whole project.
pub fn build_log_graph(index: &ProjectIndex, cg: &CallGraph) -> LogGraph {
    derive(index, cg, false)
}

/// Rebuilds `lg`'s edges with constant-false branch arms treated as dead:
/// any edge whose every generating path crosses `if (false)`-style code
/// disappears, along with everything that only those paths carried. Nodes
/// stay, even when they end up isolated.
pub fn filter_constant_false_paths(
    lg: &LogGraph,
    index: &ProjectIndex,
    cg: &CallGraph,
) -> LogGraph {
    let refined = derive(index, cg, true);
    // The refinement can only lose paths, so its edges are a subset of the
    // original's; intersecting guards the invariant even if the inputs
    // were built from a different index revision.
    let mut out = LogGraph {
        nodes: lg.nodes.clone(),
        pruned_methods: lg.pruned_methods.clone(),
        anchors: refined.anchors,
        ..LogGraph::default()
    };
    for (from, to) in &refined.edges {
        if lg.edges.contains(&(from.clone(), to.clone())) {
            out.insert_edge(from, to);
        }
    }
    out
}

/// Point-level interprocedural flow graph scaffolding.
struct Icfg {
    succs: Vec<BTreeSet<usize>>,
    /// Log points, keyed by point id, carrying the graph node id.
    log_at: BTreeMap<usize, String>,
    entry: BTreeMap<usize, usize>,
    exit: BTreeMap<usize, usize>,
    /// (method idx, site idx, call point, return point) per call event.
    calls: Vec<(usize, usize, usize, usize)>,
    skip_infeasible: bool,
}

impl Icfg {
    fn new_point(&mut self) -> usize {
        self.succs.push(BTreeSet::new());
        self.succs.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.succs[from].insert(to);
    }

    fn fold(
        &mut self,
        index: &ProjectIndex,
        m_idx: usize,
        node: &FlowNode,
        preds: &BTreeSet<usize>,
    ) -> BTreeSet<usize> {
        match node {
            FlowNode::Empty => preds.clone(),
            FlowNode::Log(log_idx) => {
                let point = self.new_point();
                let method = &index.methods[m_idx];
                let line = method.logging_statements[*log_idx].line;
                self.log_at.insert(point, node_id(&method.id, line));
                for &p in preds {
                    self.edge(p, point);
                }
                BTreeSet::from([point])
            }
            FlowNode::Call(site_idx) => {
                let call = self.new_point();
                let ret = self.new_point();
                self.calls.push((m_idx, *site_idx, call, ret));
                for &p in preds {
                    self.edge(p, call);
                }
                BTreeSet::from([ret])
            }
            FlowNode::Seq(children) => {
                let mut cur = preds.clone();
                for child in children {
                    cur = self.fold(index, m_idx, child, &cur);
                }
                cur
            }
            FlowNode::Branch(arms) => {
                let mut out = BTreeSet::new();
                for arm in arms {
                    if self.skip_infeasible && arm.feasible == Some(false) {
                        continue;
                    }
                    out.extend(self.fold(index, m_idx, &arm.body, preds));
                }
                out
            }
            FlowNode::Exit => {
                let exit = self.exit[&m_idx];
                for &p in preds {
                    self.edge(p, exit);
                }
                BTreeSet::new()
            }
        }
    }
}

fn derive(index: &ProjectIndex, cg: &CallGraph, skip_infeasible: bool) -> LogGraph {
    let kept = kept_methods(index, cg);

    let mut icfg = Icfg {
        succs: Vec::new(),
        log_at: BTreeMap::new(),
        entry: BTreeMap::new(),
        exit: BTreeMap::new(),
        calls: Vec::new(),
        skip_infeasible,
    };

    for &m_idx in &kept {
        let method = &index.methods[m_idx];
        if !method.has_body {
            continue;
        }
        let entry = icfg.new_point();
        let exit = icfg.new_point();
        icfg.entry.insert(m_idx, entry);
        icfg.exit.insert(m_idx, exit);
        let outs = icfg.fold(index, m_idx, &method.flow, &BTreeSet::from([entry]));
        for p in outs {
            icfg.edge(p, exit);
        }
    }

    // Interprocedural stitching. A call into a body we model detours
    // through it; any unresolved or unmodeled target keeps a direct
    // fall-through so the call never blocks path discovery. Calls into
    // pruned methods are remembered so those methods can still be
    // anchored at their call sites.
    let mut pruned_sites: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (m_idx, site_idx, call, ret) in icfg.calls.clone() {
        let method = &index.methods[m_idx];
        let site = &method.call_sites[site_idx];
        let targets = callgraph::resolve_call(index, method, site);
        let mut transparent = targets.is_empty();
        for target_id in &targets {
            let Some(t_idx) = index.method_idx(target_id) else {
                transparent = true;
                continue;
            };
            match icfg.entry.get(&t_idx) {
                Some(&t_entry) => {
                    let t_exit = icfg.exit[&t_idx];
                    icfg.edge(call, t_entry);
                    icfg.edge(t_exit, ret);
                }
                None => {
                    transparent = true;
                    pruned_sites.entry(t_idx).or_default().push((call, ret));
                }
            }
        }
        if transparent {
            icfg.edge(call, ret);
        }
    }

    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); icfg.succs.len()];
    for (from, outs) in icfg.succs.iter().enumerate() {
        for &to in outs {
            preds[to].insert(from);
        }
    }

    let mut graph = LogGraph::default();
    for &m_idx in &kept {
        let method = &index.methods[m_idx];
        for stmt in &method.logging_statements {
            let id = node_id(&method.id, stmt.line);
            graph.nodes.insert(
                id.clone(),
                LogNode {
                    id,
                    method: method.id.clone(),
                    line: stmt.line,
                    level: stmt.level,
                    text: single_line(&stmt.raw_text),
                },
            );
        }
    }
    graph.pruned_methods = index
        .methods
        .iter()
        .enumerate()
        .filter(|(i, m)| m.has_body && !kept.contains(i))
        .map(|(_, m)| m.id.clone())
        .collect();

    // One forward sweep per log: every first log reached downstream gets
    // an edge, and the walk never continues through a log.
    let log_points: Vec<(usize, String)> = icfg
        .log_at
        .iter()
        .map(|(&p, id)| (p, id.clone()))
        .collect();
    for (point, from_id) in &log_points {
        for to_id in flood_to_logs(&icfg.succs, &icfg.log_at, *point) {
            graph.insert_edge(from_id, &to_id);
        }
    }

    for &m_idx in &kept {
        let method = &index.methods[m_idx];
        let Some(&entry) = icfg.entry.get(&m_idx) else {
            continue;
        };
        let anchor = Anchor {
            preceding: flood_to_logs(&preds, &icfg.log_at, entry),
            succeeding: flood_to_logs(&icfg.succs, &icfg.log_at, entry),
        };
        graph.anchors.insert(method.id.clone(), anchor);
    }
    // A pruned method reached from modeled code still deserves an anchor:
    // its entry position coincides with its call sites, the call being
    // transparent.
    for (t_idx, sites) in pruned_sites {
        let mut preceding = BTreeSet::new();
        let mut succeeding = BTreeSet::new();
        for (call, ret) in sites {
            preceding.extend(flood_to_logs(&preds, &icfg.log_at, call));
            succeeding.extend(flood_to_logs(&icfg.succs, &icfg.log_at, ret));
        }
        graph.anchors.insert(
            index.methods[t_idx].id.clone(),
            Anchor {
                preceding: preceding.into_iter().collect(),
                succeeding: succeeding.into_iter().collect(),
            },
        );
    }
    graph
}

/// Methods worth modeling: those containing logs plus everything that can
/// reach one through calls. The rest are log-irrelevant.
fn kept_methods(index: &ProjectIndex, cg: &CallGraph) -> BTreeSet<usize> {
    let mut kept = BTreeSet::new();
    let mut queue = VecDeque::new();
    for (i, method) in index.methods.iter().enumerate() {
        if !method.logging_statements.is_empty() {
            kept.insert(i);
            queue.push_back(method.id.clone());
        }
    }
    while let Some(id) = queue.pop_front() {
        for caller in cg.callers(&id) {
            if let Some(c_idx) = index.method_idx(caller) {
                if kept.insert(c_idx) {
                    queue.push_back(caller.to_string());
                }
            }
        }
    }
    kept
}

/// BFS from `start` (exclusive) over `adj`, collecting the first log
/// encountered on each path and never walking past one.
fn flood_to_logs(
    adj: &[BTreeSet<usize>],
    log_at: &BTreeMap<usize, String>,
    start: usize,
) -> Vec<String> {
    let mut seen = BTreeSet::from([start]);
    let mut frontier = VecDeque::from([start]);
    let mut found = BTreeSet::new();
    while let Some(point) = frontier.pop_front() {
        for &next in &adj[point] {
            if !seen.insert(next) {
                continue;
            }
            if let Some(id) = log_at.get(&next) {
                found.insert(id.clone());
            } else {
                frontier.push_back(next);
            }
        }
    }
    found.into_iter().collect()
}

/// Up to `hops` logs on each side of a method's entry, nearest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogSlice {
    pub target: String,
    pub preceding: Vec<LogNode>,
    pub succeeding: Vec<LogNode>,
    pub rendered: String,
}

/// Walks the log graph away from `target`'s anchor, one pick per hop.
///
/// Candidates from train-split methods win over test-split ones at the
/// same distance; remaining ties fall to the seeded RNG. `exclude` names
/// a node treated as if its statement were deleted: it never appears in
/// the slice and candidate sets pass through it to its neighbors.
pub fn log_slice(
    lg: &LogGraph,
    target: &str,
    hops: u8,
    train_ids: &BTreeSet<String>,
    seed: u64,
    exclude: Option<&str>,
) -> LogSlice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = lg.anchor(target).cloned().unwrap_or_default();

    let preceding = walk_side(lg, &anchor.preceding, hops, train_ids, &mut rng, exclude, true);
    let succeeding = walk_side(
        lg,
        &anchor.succeeding,
        hops,
        train_ids,
        &mut rng,
        exclude,
        false,
    );
    let rendered = render_slice(&preceding, &succeeding);
    LogSlice {
        target: target.to_string(),
        preceding,
        succeeding,
        rendered,
    }
}

fn walk_side(
    lg: &LogGraph,
    first_candidates: &[String],
    hops: u8,
    train_ids: &BTreeSet<String>,
    rng: &mut ChaCha8Rng,
    exclude: Option<&str>,
    backward: bool,
) -> Vec<LogNode> {
    let mut picked: Vec<LogNode> = Vec::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut candidates = expand_excluded(lg, first_candidates, exclude, backward);
    for _ in 0..hops {
        candidates.retain(|c| !taken.contains(c));
        let Some(choice) = choose(lg, &candidates, train_ids, rng) else {
            break;
        };
        taken.insert(choice.clone());
        let neighbors: Vec<String> = if backward {
            lg.predecessors(&choice).iter().map(|s| s.to_string()).collect()
        } else {
            lg.successors(&choice).iter().map(|s| s.to_string()).collect()
        };
        if let Some(node) = lg.node(&choice) {
            picked.push(node.clone());
        }
        candidates = expand_excluded(lg, &neighbors, exclude, backward);
    }
    picked
}

/// Drops the excluded node from a candidate list, splicing in whatever
/// lies just beyond it in the walking direction.
fn expand_excluded(
    lg: &LogGraph,
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
            let beyond = if backward {
                lg.predecessors(c)
            } else {
                lg.successors(c)
            };
            out.extend(
                beyond
                    .into_iter()
                    .filter(|b| *b != excluded)
                    .map(String::from),
            );
        } else {
            out.insert(c.clone());
        }
    }
    out.into_iter().collect()
}

fn choose(
    lg: &LogGraph,
    candidates: &[String],
    train_ids: &BTreeSet<String>,
    rng: &mut ChaCha8Rng,
) -> Option<String> {
    if candidates.is_empty() {
        return None;
    }
    let preferred: Vec<&String> = candidates
        .iter()
        .filter(|c| {
            lg.node(c)
                .is_some_and(|n| train_ids.contains(&n.method))
        })
        .collect();
    let pool: Vec<&String> = if preferred.is_empty() {
        candidates.iter().collect()
    } else {
        preferred
    };
    Some(match pool.as_slice() {
        [only] => (*only).clone(),
        many => many[rng.gen_range(0..many.len())].clone(),
    })
}

fn render_slice(preceding: &[LogNode], succeeding: &[LogNode]) -> String {
    let mut lines = Vec::new();
    for node in preceding {
        lines.push(format!("A possible preceding log: {}", node.text));
    }
    for node in succeeding {
        lines.push(format!("A possible subsequent log: {}", node.text));
    }
    lines.join("\n")
}
