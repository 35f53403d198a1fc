//! Project-wide static call graph and two-hop code slices.
//!
//! Call sites are resolved with class hierarchy analysis over source: the
//! declared receiver type anchors the lookup and every project-internal
//! overrider becomes an additional candidate. Calls into types with no
//! project source (JDK, third-party jars) produce no edge because there is
//! no body to slice. Constructors participate as `<init>` methods; static
//! initializers do not.

use crate::corpus::{base_type_name, ClassRecord, MethodRecord, ProjectIndex, Receiver};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CallGraphError {
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

/// One directed call edge. `line` is 1-based relative to the caller's
/// first line, so the same pair can appear once per distinct call site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub line: u32,
}

/// Immutable call graph over every method in the project.
#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<CallEdge>,
    forward: BTreeMap<String, BTreeSet<String>>,
    reverse: BTreeMap<String, BTreeSet<String>>,
    /// Call sites whose receiver type or target never resolved in-project.
    pub unresolved_calls: u32,
}

impl CallGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn contains(&self, method_id: &str) -> bool {
        self.nodes.contains(method_id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &CallEdge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Distinct callees of `method_id`, sorted.
    pub fn callees(&self, method_id: &str) -> Vec<&str> {
        self.forward
            .get(method_id)
            .map(|s| s.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Distinct callers of `method_id`, sorted.
    pub fn callers(&self, method_id: &str) -> Vec<&str> {
        self.reverse
            .get(method_id)
            .map(|s| s.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    fn insert_edge(&mut self, caller: &str, callee: &str, line: u32) {
        self.edges.insert(CallEdge {
            caller: caller.to_string(),
            callee: callee.to_string(),
            line,
        });
        self.forward
            .entry(caller.to_string())
            .or_default()
            .insert(callee.to_string());
        self.reverse
            .entry(callee.to_string())
            .or_default()
            .insert(caller.to_string());
    }

    /// Adjacency-list view: every method id maps to its outgoing calls,
    /// isolated methods included with an empty list.
    pub fn to_adjacency(&self) -> BTreeMap<String, Vec<AdjacencyEntry>> {
        let mut out: BTreeMap<String, Vec<AdjacencyEntry>> = self
            .nodes
            .iter()
            .map(|n| (n.clone(), Vec::new()))
            .collect();
        for edge in &self.edges {
            out.entry(edge.caller.clone())
                .or_default()
                .push(AdjacencyEntry {
                    callee: edge.callee.clone(),
                    line: edge.line,
                });
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CallGraphError> {
        let body = serde_json::to_string_pretty(&self.to_adjacency()).expect("graph serializes");
        std::fs::write(path, body).map_err(|source| CallGraphError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self, CallGraphError> {
        let raw = std::fs::read_to_string(path).map_err(|source| CallGraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let adjacency: BTreeMap<String, Vec<AdjacencyEntry>> =
            serde_json::from_str(&raw).map_err(|source| CallGraphError::BadDump {
                path: path.to_path_buf(),
                source,
            })?;
        let mut graph = CallGraph::default();
        for (caller, entries) in adjacency {
            graph.nodes.insert(caller.clone());
            for entry in entries {
                graph.nodes.insert(entry.callee.clone());
                graph.insert_edge(&caller, &entry.callee, entry.line);
            }
        }
        Ok(graph)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyEntry {
    pub callee: String,
    pub line: u32,
}

/// Builds the call graph for every method in the index.
///
/// Virtual calls link to the method visible on the declared receiver type
/// and to every project subtype that overrides it. Overloads are narrowed
/// by arity and, where argument types are inferable, by declared argument
/// types; still-ambiguous overloads link to all candidates. Only methods
/// with bodies become edge targets.
pub fn build_call_graph(index: &ProjectIndex) -> CallGraph {
    let mut graph = CallGraph::default();
    for method in &index.methods {
        graph.nodes.insert(method.id.clone());
    }
    for method in &index.methods {
        if !method.has_body {
            continue;
        }
        for site in &method.call_sites {
            let targets = resolve_call(index, method, site);
            if targets.is_empty() {
                graph.unresolved_calls += 1;
                continue;
            }
            for target in targets {
                graph.insert_edge(&method.id, &target, site.line);
            }
        }
    }
    graph
}

/// Resolves one call site to the ids of project methods it may reach.
pub(crate) fn resolve_call(
    index: &ProjectIndex,
    caller: &MethodRecord,
    site: &crate::corpus::CallSiteRecord,
) -> Vec<String> {
    if site.name == "<init>" {
        return resolve_constructor(index, caller, site);
    }
    let dispatch = receiver_dispatch(index, caller, &site.receiver);
    let Some(dispatch) = dispatch else {
        return Vec::new();
    };
    let mut out = BTreeSet::new();
    match dispatch {
        Dispatch::Virtual(fqcn) => {
            // The declaration visible on the declared type itself (possibly
            // inherited), plus every overrider below it in the hierarchy.
            for id in declaration_lookup(index, &fqcn, site) {
                out.insert(id);
            }
            for sub in index.subtype_closure(&fqcn) {
                for id in declared_matches(index, &sub, site) {
                    out.insert(id);
                }
            }
        }
        Dispatch::Static(fqcn) => {
            for id in declaration_lookup(index, &fqcn, site) {
                out.insert(id);
            }
        }
    }
    out.into_iter()
        .filter(|id| index.method(id).is_some_and(|m| m.has_body))
        .collect()
}

enum Dispatch {
    /// Instance call: declared type plus overriders.
    Virtual(String),
    /// Call through a type name or `super`: no subtype cone.
    Static(String),
}

/// Maps a receiver shape to the class the lookup starts from.
fn receiver_dispatch(
    index: &ProjectIndex,
    caller: &MethodRecord,
    receiver: &Receiver,
) -> Option<Dispatch> {
    match receiver {
        Receiver::Implicit | Receiver::This => {
            Some(Dispatch::Virtual(caller.class_fqcn.clone()))
        }
        Receiver::Super => {
            let class = index.classes.get(&caller.class_fqcn)?;
            class.resolved_super.clone().map(Dispatch::Static)
        }
        Receiver::Name(name) => {
            if let Some(type_name) = declared_type_of_name(index, caller, name) {
                resolve_in_caller_file(index, caller, &type_name).map(Dispatch::Virtual)
            } else {
                // Not a visible variable: treat as a type name (static call).
                resolve_in_caller_file(index, caller, name).map(Dispatch::Static)
            }
        }
        Receiver::Path(path) => resolve_path(index, caller, path),
        Receiver::Call {
            base,
            name,
            arg_count,
        } => {
            let base_class = match base.as_ref() {
                Receiver::Implicit => Some(Dispatch::Virtual(caller.class_fqcn.clone())),
                other => receiver_dispatch(index, caller, other),
            }?;
            let fqcn = match base_class {
                Dispatch::Virtual(f) | Dispatch::Static(f) => f,
            };
            let ret = return_type_of(index, &fqcn, name, *arg_count)?;
            Some(Dispatch::Virtual(ret))
        }
        Receiver::NewType(type_name) => {
            resolve_in_caller_file(index, caller, type_name).map(Dispatch::Virtual)
        }
        Receiver::Opaque => None,
    }
}

fn resolve_constructor(
    index: &ProjectIndex,
    caller: &MethodRecord,
    site: &crate::corpus::CallSiteRecord,
) -> Vec<String> {
    let class_fqcn = match &site.receiver {
        Receiver::NewType(type_name) => resolve_in_caller_file(index, caller, type_name),
        // `this(...)` / `super(...)` delegation inside a constructor.
        Receiver::This => Some(caller.class_fqcn.clone()),
        Receiver::Super => index
            .classes
            .get(&caller.class_fqcn)
            .and_then(|c| c.resolved_super.clone()),
        _ => None,
    };
    let Some(fqcn) = class_fqcn else {
        return Vec::new();
    };
    declared_matches(index, &fqcn, site)
        .into_iter()
        .filter(|id| index.method(id).is_some_and(|m| m.has_body))
        .collect()
}

/// `this.worker` or `util.Tables`: resolve the first segment as a variable
/// or type, then walk the remaining segments as fields.
fn resolve_path(index: &ProjectIndex, caller: &MethodRecord, path: &str) -> Option<Dispatch> {
    let mut segments: Vec<&str> = path.split('.').collect();
    if segments.first() == Some(&"this") {
        segments.remove(0);
    }
    if segments.is_empty() {
        return Some(Dispatch::Virtual(caller.class_fqcn.clone()));
    }
    let head = segments[0];
    let (mut fqcn, mut is_static) = if let Some(t) = declared_type_of_name(index, caller, head) {
        (resolve_in_caller_file(index, caller, &t)?, false)
    } else if let Some(t) = resolve_in_caller_file(index, caller, head) {
        (t, true)
    } else {
        // Possibly a package-qualified type: try progressively longer joins.
        let mut found = None;
        for cut in (1..=segments.len()).rev() {
            let joined = segments[..cut].join(".");
            if index.classes.contains_key(&joined) {
                segments.drain(..cut - 1);
                found = Some(joined);
                break;
            }
        }
        (found?, true)
    };
    for segment in &segments[1..] {
        let field_type = field_type_in_hierarchy(index, &fqcn, segment)?;
        fqcn = resolve_in_class_file(index, &fqcn, &field_type)?;
        is_static = false;
    }
    Some(if is_static {
        Dispatch::Static(fqcn)
    } else {
        Dispatch::Virtual(fqcn)
    })
}

/// Declared type of a simple name in scope: parameters, then locals, then
/// fields of the enclosing class and its superclasses.
pub(crate) fn declared_type_of_name(
    index: &ProjectIndex,
    method: &MethodRecord,
    name: &str,
) -> Option<String> {
    if let Some(p) = method.parameters.iter().find(|p| p.name == name) {
        return Some(p.type_name.clone());
    }
    if let Some(l) = method.locals.iter().find(|l| l.name == name) {
        return Some(l.type_name.clone());
    }
    field_type_in_hierarchy(index, &method.class_fqcn, name)
}

pub(crate) fn field_type_in_hierarchy(
    index: &ProjectIndex,
    fqcn: &str,
    name: &str,
) -> Option<String> {
    let mut chain = vec![fqcn.to_string()];
    chain.extend(index.superclass_chain(fqcn));
    for class_fqcn in chain {
        if let Some(class) = index.classes.get(&class_fqcn) {
            if let Some(f) = class.fields.iter().find(|f| f.name == name) {
                return Some(f.type_name.clone());
            }
        }
    }
    None
}

fn resolve_in_caller_file(
    index: &ProjectIndex,
    caller: &MethodRecord,
    type_name: &str,
) -> Option<String> {
    index.resolve_type_in_file(index.file_of_method(caller), type_name)
}

/// Resolves a type name in the context of the file that declares `fqcn`.
fn resolve_in_class_file(index: &ProjectIndex, fqcn: &str, type_name: &str) -> Option<String> {
    let class = index.classes.get(fqcn)?;
    let file = &index.files[class.file_idx];
    index.resolve_type_in_file(file, type_name)
}

/// Return type of `name(...)` as seen on `fqcn`, resolved to a project
/// class. Walks the superclass chain and interfaces for the declaration.
fn return_type_of(
    index: &ProjectIndex,
    fqcn: &str,
    name: &str,
    arg_count: usize,
) -> Option<String> {
    for class_fqcn in hierarchy_upward(index, fqcn) {
        let Some(class) = index.classes.get(&class_fqcn) else {
            continue;
        };
        for &idx in &class.method_idxs {
            let m = &index.methods[idx];
            if m.name == name && arity_matches(m, arg_count) {
                if m.return_type.is_empty() || m.return_type == "void" {
                    return None;
                }
                return resolve_in_class_file(index, &class_fqcn, &m.return_type);
            }
        }
    }
    None
}

/// `fqcn` first, then superclasses, then interfaces breadth-first.
fn hierarchy_upward(index: &ProjectIndex, fqcn: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([fqcn.to_string()]);
    let mut order = Vec::new();
    while let Some(cur) = queue.pop_front() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        if let Some(class) = index.classes.get(&cur) {
            if let Some(s) = &class.resolved_super {
                queue.push_back(s.clone());
            }
            for i in &class.resolved_interfaces {
                queue.push_back(i.clone());
            }
        }
        order.push(cur);
    }
    order
}

/// Matching declarations visible on `fqcn`: its own first, otherwise the
/// nearest ones up the hierarchy.
fn declaration_lookup(
    index: &ProjectIndex,
    fqcn: &str,
    site: &crate::corpus::CallSiteRecord,
) -> Vec<String> {
    for class_fqcn in hierarchy_upward(index, fqcn) {
        let matches = declared_matches(index, &class_fqcn, site);
        if !matches.is_empty() {
            return matches;
        }
    }
    Vec::new()
}

/// Matching declarations directly on `fqcn`, overload-filtered.
fn declared_matches(
    index: &ProjectIndex,
    fqcn: &str,
    site: &crate::corpus::CallSiteRecord,
) -> Vec<String> {
    let Some(class) = index.classes.get(fqcn) else {
        return Vec::new();
    };
    let by_arity: Vec<&MethodRecord> = class
        .method_idxs
        .iter()
        .map(|&i| &index.methods[i])
        .filter(|m| m.name == site.name && arity_matches(m, site.arg_count))
        .collect();
    if by_arity.len() <= 1 {
        return by_arity.into_iter().map(|m| m.id.clone()).collect();
    }
    // Same-arity overloads: narrow by inferable argument types, keeping
    // everything when the hints cannot separate them.
    let hints: Vec<Option<String>> = site
        .arg_texts
        .iter()
        .map(|a| arg_type_hint(class, a))
        .collect();
    let narrowed: Vec<&&MethodRecord> = by_arity
        .iter()
        .filter(|m| overload_compatible(m, &hints))
        .collect();
    let chosen = if narrowed.is_empty() { by_arity.iter().collect() } else { narrowed };
    chosen.into_iter().map(|m| m.id.clone()).collect()
}

fn arity_matches(method: &MethodRecord, arg_count: usize) -> bool {
    let n = method.parameters.len();
    let varargs = method
        .parameters
        .last()
        .is_some_and(|p| p.type_name.ends_with("..."));
    if varargs {
        arg_count >= n.saturating_sub(1)
    } else {
        arg_count == n
    }
}

fn overload_compatible(method: &MethodRecord, hints: &[Option<String>]) -> bool {
    for (i, hint) in hints.iter().enumerate() {
        let Some(hint) = hint else { continue };
        let Some(param) = method.parameters.get(i) else {
            // Hint beyond the fixed params lands in a varargs tail.
            continue;
        };
        let declared = base_type_name(&param.type_name);
        if declared != hint && !widening_ok(hint, declared) {
            return false;
        }
    }
    true
}

/// Primitive widenings that Java applies silently; anything else must
/// match the declared type exactly for the hint to count.
fn widening_ok(hint: &str, declared: &str) -> bool {
    matches!(
        (hint, declared),
        ("int", "long") | ("int", "double") | ("int", "float") | ("long", "double")
            | ("float", "double") | ("char", "int")
    )
}

/// Best-effort static type of an argument expression; `None` when the
/// expression is anything beyond a literal or a simple name.
fn arg_type_hint(class: &ClassRecord, text: &str) -> Option<String> {
    let t = text.trim();
    if t.is_empty() || t == "null" {
        return None;
    }
    if t.starts_with('"') {
        return Some("String".to_string());
    }
    if t.starts_with('\'') {
        return Some("char".to_string());
    }
    if t == "true" || t == "false" {
        return Some("boolean".to_string());
    }
    if t.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        let lower = t.to_ascii_lowercase();
        if lower.ends_with('l') {
            return Some("long".to_string());
        }
        if lower.ends_with('f') {
            return Some("float".to_string());
        }
        if lower.ends_with('d') || t.contains('.') {
            return Some("double".to_string());
        }
        return Some("int".to_string());
    }
    if let Some(rest) = t.strip_prefix("new") {
        let type_part: String = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '.')
            .collect();
        if !type_part.is_empty() {
            return Some(base_type_name(&type_part).to_string());
        }
    }
    if t.chars().all(|c| c.is_alphanumeric() || c == '_') {
        // A simple name: look it up in each method of the class is too
        // broad, so only fields give a hint here; callers pass richer
        // context through `declared_type_of_name` when they have it.
        if let Some(f) = class.fields.iter().find(|f| f.name == t) {
            return Some(base_type_name(&f.type_name).to_string());
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// The entry calls the previous link (backward direction).
    CalledBy,
    /// The entry is called by the previous link (forward direction).
    Calls,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainEntry {
    pub method_id: String,
    pub relation: Relation,
    /// Distance from the target along this direction, 1-based.
    pub hop: u8,
}

/// One randomly chosen invocation path around a target method, rendered
/// as relationship sentences followed by the chained method sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeSlice {
    pub target: String,
    pub chain: Vec<ChainEntry>,
    pub rendered: String,
}

/// Walks up to `hops` caller edges and `hops` callee edges away from
/// `target`, picking uniformly with the seeded RNG whenever several
/// neighbors compete. The same `(graph, target, hops, seed)` always
/// yields the same slice.
pub fn code_slice(
    graph: &CallGraph,
    index: &ProjectIndex,
    target: &str,
    hops: u8,
    seed: u64,
) -> CodeSlice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Vec::new();
    let mut visited: BTreeSet<&str> = BTreeSet::from([target]);

    let mut cursor = target;
    for hop in 1..=hops {
        let options: Vec<&str> = graph
            .callers(cursor)
            .into_iter()
            .filter(|c| !visited.contains(c))
            .collect();
        let Some(pick) = pick_one(&mut rng, &options) else {
            break;
        };
        visited.insert(pick);
        chain.push(ChainEntry {
            method_id: pick.to_string(),
            relation: Relation::CalledBy,
            hop,
        });
        cursor = pick;
    }

    let mut cursor = target;
    for hop in 1..=hops {
        let options: Vec<&str> = graph
            .callees(cursor)
            .into_iter()
            .filter(|c| !visited.contains(c))
            .collect();
        let Some(pick) = pick_one(&mut rng, &options) else {
            break;
        };
        visited.insert(pick);
        chain.push(ChainEntry {
            method_id: pick.to_string(),
            relation: Relation::Calls,
            hop,
        });
        cursor = pick;
    }

    let rendered = render_slice(index, target, &chain);
    CodeSlice {
        target: target.to_string(),
        chain,
        rendered,
    }
}

fn pick_one<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> Option<&'a str> {
    match options {
        [] => None,
        [only] => Some(only),
        many => Some(many[rng.gen_range(0..many.len())]),
    }
}

fn render_slice(index: &ProjectIndex, target: &str, chain: &[ChainEntry]) -> String {
    let mut lines = Vec::new();
    let mut prev_back = target;
    let mut prev_fwd = target;
    for entry in chain {
        match entry.relation {
            Relation::CalledBy => {
                lines.push(format!("{prev_back} is invoked by {}.", entry.method_id));
                prev_back = &entry.method_id;
            }
            Relation::Calls => {
                lines.push(format!("{prev_fwd} invokes {}.", entry.method_id));
                prev_fwd = &entry.method_id;
            }
        }
    }
    let mut out = lines.join("\n");
    for entry in chain {
        if let Some(m) = index.method(&entry.method_id) {
            out.push_str("\n\nSource of ");
            out.push_str(&entry.method_id);
            out.push_str(":\n");
            out.push_str(&m.source_text);
        }
    }
    out
}
