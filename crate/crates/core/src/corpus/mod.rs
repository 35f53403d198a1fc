//! Project scanning, indexing, and sample construction.
//!
//! A [`ProjectIndex`] holds everything later stages need: classes with their
//! hierarchy facts, methods with source text, extracted logging statements,
//! call sites, local variables, and a per-method control-flow outline. The
//! index is built once per project by [`scan_project`] and treated as
//! read-only afterwards.

mod indexer;
mod sample;

pub use sample::{
    build_samples, meta_path, normalize_ws, read_dataset, read_meta, reinserted_method,
    write_dataset, DatasetMeta, Sample, SampleBuild, Split, SplitSet,
};

use crate::level::Level;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Receiver simple names that mark a call as a logger call even when the
/// receiver's type cannot be resolved.
pub const DEFAULT_LOGGER_NAMES: [&str; 5] = ["LOG", "log", "logger", "LOGGER", "s_logger"];

/// Knobs for project scanning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Project name recorded on samples; defaults to the root directory name.
    pub project: Option<String>,
    /// Glob patterns (relative to the root) whose files are skipped.
    pub exclude: Vec<String>,
    /// Receiver names recognized as loggers; see [`DEFAULT_LOGGER_NAMES`].
    pub logger_receiver_names: BTreeSet<String>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            project: None,
            exclude: Vec::new(),
            logger_receiver_names: DEFAULT_LOGGER_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("no parsable .java files under {0}")]
    EmptyCorpus(PathBuf),
    #[error("invalid exclude pattern {pattern}: {source}")]
    BadExclude {
        pattern: String,
        source: globset::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset line {line} is not a valid sample: {source}")]
    BadDatasetLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("dataset meta {path} is invalid: {source}")]
    BadMeta {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// One scanned source file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFile {
    /// Path relative to the corpus root.
    pub path: PathBuf,
    pub package: String,
    pub imports: Vec<Import>,
    /// False when the parser reported syntax errors; such files contribute
    /// no classes or methods.
    pub parse_ok: bool,
    /// Total line count, used by prompt-cost measurements.
    pub line_count: u32,
    /// Total character count of the file.
    pub char_count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Import {
    /// Dotted path without the trailing `.*`.
    pub path: String,
    pub is_static: bool,
    pub wildcard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeParam {
    pub name: String,
    /// First declared bound, when present (`T extends Shape` keeps `Shape`).
    pub bound: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRecord {
    pub name: String,
    /// Declared type as written, whitespace removed, generics kept.
    pub type_name: String,
    pub is_static: bool,
    pub is_private: bool,
}

/// A class, interface, enum, or record declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassRecord {
    /// Dotted fully qualified name; nested types use `Outer.Inner`.
    pub fqcn: String,
    pub simple_name: String,
    pub kind: TypeKind,
    pub file_idx: usize,
    /// Superclass name as written (generics stripped); resolved form below.
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    /// Superclass fqcn when it names a project-internal class.
    pub resolved_super: Option<String>,
    pub resolved_interfaces: Vec<String>,
    pub type_params: Vec<TypeParam>,
    pub fields: Vec<FieldRecord>,
    pub method_idxs: Vec<usize>,
    pub line: u32,
}

/// How a call names its receiver, before any type resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    /// Bare call: `configure()`.
    Implicit,
    This,
    Super,
    /// Single identifier: a variable or a class simple name.
    Name(String),
    /// Dotted identifier path: `this.worker`, `util.Tables`.
    Path(String),
    /// Result of another call: `handler.getWorker()`.
    Call {
        base: Box<Receiver>,
        name: String,
        arg_count: usize,
    },
    /// Fresh object: `new Widget(..)` used as a receiver.
    NewType(String),
    /// Anything the resolver does not attempt (casts, array elements, ...).
    Opaque,
}

/// One call site inside a method body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallSiteRecord {
    /// 1-based line relative to the method's first line.
    pub line: u32,
    /// Invoked method name; `<init>` for constructor calls.
    pub name: String,
    pub receiver: Receiver,
    pub arg_count: usize,
    /// Argument expressions, whitespace-stripped, for overload hints.
    pub arg_texts: Vec<String>,
    /// True when the call sits inside a recognized logging statement; such
    /// calls count for the call graph but not as control-flow events.
    pub in_log: bool,
}

/// A recognized logging statement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoggingStatement {
    /// 1-based first line relative to the method's first line.
    pub line: u32,
    /// 1-based last line (equal to `line` for single-line statements).
    pub end_line: u32,
    /// 0-based byte column where the statement starts on its first line.
    pub col: u32,
    /// 0-based byte column just past the statement on its last line.
    pub end_col: u32,
    pub level: Level,
    /// Full statement text including the trailing semicolon.
    pub raw_text: String,
    pub text_literals: Vec<String>,
    pub variable_exprs: Vec<String>,
    /// Innermost enclosing brace block, as `B<start>-<end>` in method lines.
    pub block_id: String,
    /// True when the statement is a direct child of a brace block, so
    /// removing it leaves the method syntactically whole (a log that is the
    /// sole body of a braceless `if` is not removable).
    pub removable: bool,
}

impl LoggingStatement {
    /// The logged text: literal fragments concatenated in order.
    pub fn text(&self) -> String {
        self.text_literals.concat()
    }
}

/// Control-flow outline of a method body, reduced to the events the log
/// graph cares about. Loops appear as one-pass branches (no back edges),
/// `break`/`continue` are transparent, and `return`/`throw` end the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlowNode {
    Empty,
    /// Index into [`MethodRecord::logging_statements`].
    Log(usize),
    /// Index into [`MethodRecord::call_sites`].
    Call(usize),
    Seq(Vec<FlowNode>),
    Branch(Vec<FlowArm>),
    /// `return` or `throw`: control leaves the method here.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowArm {
    /// `Some(false)` marks an arm guarded by a literally-false condition
    /// (or the untaken side of a literally-true one).
    pub feasible: Option<bool>,
    pub body: FlowNode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalVar {
    pub name: String,
    pub type_name: String,
}

/// A method or constructor declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRecord {
    /// `fqcn#name(paramTypes)`; constructors use `<init>`.
    pub id: String,
    /// Declared name; `<init>` for constructors.
    pub name: String,
    pub class_fqcn: String,
    pub file_idx: usize,
    /// Display form, e.g. `void stop(Service service)`.
    pub signature: String,
    pub parameters: Vec<Param>,
    pub return_type: String,
    pub is_static: bool,
    pub is_private: bool,
    pub has_body: bool,
    /// 1-based line span in the declaring file.
    pub start_line: u32,
    pub end_line: u32,
    /// Full declaration text, original indentation preserved.
    pub source_text: String,
    pub type_params: Vec<TypeParam>,
    pub locals: Vec<LocalVar>,
    pub logging_statements: Vec<LoggingStatement>,
    pub call_sites: Vec<CallSiteRecord>,
    pub flow: FlowNode,
}

impl MethodRecord {
    pub fn line_count(&self) -> u32 {
        self.end_line - self.start_line + 1
    }
}

/// Tallies of everything the scanner skipped or could not resolve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub files_skipped_parse: Vec<PathBuf>,
    pub anonymous_bodies_skipped: u32,
    pub local_classes_skipped: u32,
    pub unresolved_supertypes: u32,
    pub samples_skipped_nonremovable: u32,
    pub samples_skipped_duplicate_text: u32,
}

/// Read-only view of one scanned project.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectIndex {
    pub project: String,
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    /// Keyed by fqcn.
    pub classes: BTreeMap<String, ClassRecord>,
    pub methods: Vec<MethodRecord>,
    pub diagnostics: Diagnostics,
    /// Method id to `methods` index.
    method_ids: BTreeMap<String, usize>,
    /// Simple class name to fqcns carrying it, sorted.
    simple_names: BTreeMap<String, Vec<String>>,
    /// fqcn to direct project-internal subtypes.
    subtypes: BTreeMap<String, Vec<String>>,
}

impl ProjectIndex {
    pub fn method(&self, id: &str) -> Option<&MethodRecord> {
        self.method_ids.get(id).map(|&i| &self.methods[i])
    }

    pub fn method_idx(&self, id: &str) -> Option<usize> {
        self.method_ids.get(id).copied()
    }

    pub fn class_of_method(&self, method: &MethodRecord) -> Option<&ClassRecord> {
        self.classes.get(&method.class_fqcn)
    }

    pub fn file_of_method(&self, method: &MethodRecord) -> &SourceFile {
        &self.files[method.file_idx]
    }

    /// Direct project-internal subtypes of `fqcn`.
    pub fn direct_subtypes(&self, fqcn: &str) -> &[String] {
        self.subtypes.get(fqcn).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `fqcn` plus every transitive project-internal subtype, sorted.
    pub fn subtype_closure(&self, fqcn: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![fqcn.to_string()];
        while let Some(cur) = stack.pop() {
            if seen.insert(cur.clone()) {
                for sub in self.direct_subtypes(&cur) {
                    stack.push(sub.clone());
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Chain of project-internal superclasses starting at `fqcn` (exclusive).
    pub fn superclass_chain(&self, fqcn: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cur = fqcn.to_string();
        while let Some(parent) = self
            .classes
            .get(&cur)
            .and_then(|c| c.resolved_super.clone())
        {
            if chain.contains(&parent) {
                break;
            }
            chain.push(parent.clone());
            cur = parent;
        }
        chain
    }

    /// Resolves a type name written inside `file` to a project class fqcn.
    ///
    /// Order: exact fqcn, explicit import, same package, enclosing-class
    /// nesting, wildcard import. External types come back as `None`.
    pub fn resolve_type_in_file(&self, file: &SourceFile, name: &str) -> Option<String> {
        let base = base_type_name(name);
        if base.is_empty() {
            return None;
        }
        if base.contains('.') && self.classes.contains_key(base) {
            return Some(base.to_string());
        }
        for import in &file.imports {
            if import.is_static || import.wildcard {
                continue;
            }
            if import.path.ends_with(&format!(".{base}")) && self.classes.contains_key(&import.path)
            {
                return Some(import.path.clone());
            }
        }
        let same_package = if file.package.is_empty() {
            base.to_string()
        } else {
            format!("{}.{base}", file.package)
        };
        if self.classes.contains_key(&same_package) {
            return Some(same_package);
        }
        // Nested types referenced from siblings in the same file share the
        // package prefix; scan package-local fqcns for an `Outer.base` tail.
        if let Some(hit) = self
            .classes
            .keys()
            .find(|fq| fq.ends_with(&format!(".{base}")) && fq.starts_with(&file.package))
        {
            return Some(hit.clone());
        }
        for import in &file.imports {
            if import.wildcard && !import.is_static {
                let candidate = format!("{}.{base}", import.path);
                if self.classes.contains_key(&candidate) {
                    return Some(candidate);
                }
            }
        }
        None
    }

    /// All classes carrying `simple_name`, sorted by fqcn.
    pub fn classes_named(&self, simple_name: &str) -> &[String] {
        self.simple_names
            .get(simple_name)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub(crate) fn finish(&mut self) {
        let mut simple: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (fqcn, class) in &self.classes {
            simple
                .entry(class.simple_name.clone())
                .or_default()
                .push(fqcn.clone());
        }
        self.simple_names = simple;

        let mut resolutions: Vec<(String, Option<String>, Vec<String>)> = Vec::new();
        for (fqcn, class) in &self.classes {
            let file = &self.files[class.file_idx];
            let sup = class
                .superclass
                .as_deref()
                .and_then(|name| self.resolve_type_in_file(file, name));
            let ifs = class
                .interfaces
                .iter()
                .filter_map(|name| self.resolve_type_in_file(file, name))
                .collect();
            resolutions.push((fqcn.clone(), sup, ifs));
        }
        let mut subtypes: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (fqcn, sup, ifs) in resolutions {
            let class = self.classes.get_mut(&fqcn).expect("resolved key exists");
            if class.superclass.is_some() && sup.is_none() {
                self.diagnostics.unresolved_supertypes += 1;
            }
            self.diagnostics.unresolved_supertypes +=
                (class.interfaces.len() - ifs.len()) as u32;
            class.resolved_super = sup.clone();
            class.resolved_interfaces = ifs.clone();
            for parent in sup.into_iter().chain(ifs) {
                subtypes.entry(parent).or_default().push(fqcn.clone());
            }
        }
        for children in subtypes.values_mut() {
            children.sort();
            children.dedup();
        }
        self.subtypes = subtypes;

        let mut ids = BTreeMap::new();
        for (i, m) in self.methods.iter().enumerate() {
            ids.insert(m.id.clone(), i);
        }
        self.method_ids = ids;
    }
}

/// Strips generics, array suffixes, and varargs from a type name:
/// `Map<String, Long>[]` becomes `Map`.
pub fn base_type_name(name: &str) -> &str {
    let mut end = name.len();
    if let Some(lt) = name.find('<') {
        end = lt;
    }
    let head = &name[..end];
    head.trim_end_matches("...").trim_end_matches("[]").trim()
}

/// Scans `root` for Java sources and builds the project index.
///
/// Files matching any exclude glob are skipped entirely; files with syntax
/// errors are recorded with `parse_ok = false` and contribute nothing else.
/// Fails with [`CorpusError::EmptyCorpus`] when nothing parsable remains.
pub fn scan_project(root: &Path, cfg: &CorpusConfig) -> Result<ProjectIndex, CorpusError> {
    indexer::scan(root, cfg)
}
