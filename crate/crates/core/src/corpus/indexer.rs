//! Tree-sitter-backed extraction of classes, methods, logging statements,
//! call sites, and control-flow outlines from Java sources.

use super::*;
use crate::jast;
use crate::modelgw::parse::decompose_invocation;
use globset::{Glob, GlobSet, GlobSetBuilder};
use std::fs;
use tree_sitter::Node;

pub(super) fn scan(root: &Path, cfg: &CorpusConfig) -> Result<ProjectIndex, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::RootNotFound(root.to_path_buf()));
    }
    let excludes = build_globset(&cfg.exclude)?;
    let project = cfg
        .project
        .clone()
        .or_else(|| root.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "project".to_string());

    let mut index = ProjectIndex {
        project,
        root: root.to_path_buf(),
        files: Vec::new(),
        classes: BTreeMap::new(),
        methods: Vec::new(),
        diagnostics: Diagnostics::default(),
        method_ids: BTreeMap::new(),
        simple_names: BTreeMap::new(),
        subtypes: BTreeMap::new(),
    };

    let mut entries: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "java"))
        .collect();
    entries.sort();

    let mut parser = jast::parser();
    for path in entries {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let rel_str = rel.to_string_lossy().replace('\\', "/");
        if excludes.is_match(&rel_str) {
            continue;
        }
        let source = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        index_file(&mut index, &mut parser, rel, &source, cfg);
    }

    if index.files.iter().filter(|f| f.parse_ok).count() == 0 {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    index.finish();
    Ok(index)
}

fn build_globset(patterns: &[String]) -> Result<GlobSet, CorpusError> {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = Glob::new(pattern).map_err(|source| CorpusError::BadExclude {
            pattern: pattern.clone(),
            source,
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| CorpusError::BadExclude {
        pattern: "<combined>".to_string(),
        source,
    })
}

fn index_file(
    index: &mut ProjectIndex,
    parser: &mut tree_sitter::Parser,
    rel_path: PathBuf,
    source: &str,
    cfg: &CorpusConfig,
) {
    let file_idx = index.files.len();
    let tree = parser.parse(source, None);
    let mut file = SourceFile {
        path: rel_path,
        package: String::new(),
        imports: Vec::new(),
        parse_ok: false,
        line_count: source.lines().count() as u32,
        char_count: source.chars().count() as u64,
    };
    let Some(tree) = tree else {
        log::warn!("parser returned no tree for {}", file.path.display());
        index.diagnostics.files_skipped_parse.push(file.path.clone());
        index.files.push(file);
        return;
    };
    let root = tree.root_node();
    if root.has_error() {
        log::warn!("syntax errors in {}, skipping file", file.path.display());
        index.diagnostics.files_skipped_parse.push(file.path.clone());
        index.files.push(file);
        return;
    }
    file.parse_ok = true;

    for child in jast::named_children(root) {
        match child.kind() {
            "package_declaration" => {
                if let Some(name) = jast::named_children(child).into_iter().next() {
                    file.package = jast::text(name, source).to_string();
                }
            }
            "import_declaration" => {
                let text = jast::text(child, source);
                let body = text
                    .trim_start_matches("import")
                    .trim_end_matches(';')
                    .trim();
                let is_static = body.starts_with("static ");
                let body = body.trim_start_matches("static").trim();
                let wildcard = body.ends_with(".*");
                let path = body.trim_end_matches(".*").trim_end_matches('.').to_string();
                file.imports.push(Import {
                    path,
                    is_static,
                    wildcard,
                });
            }
            _ => {}
        }
    }

    let package = file.package.clone();
    let imports = file.imports.clone();
    index.files.push(file);

    let source_lines: Vec<&str> = source.lines().collect();
    for child in jast::named_children(root) {
        index_type(
            index,
            child,
            source,
            &source_lines,
            &package,
            None,
            file_idx,
            &imports,
            cfg,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn index_type(
    index: &mut ProjectIndex,
    node: Node<'_>,
    source: &str,
    source_lines: &[&str],
    package: &str,
    outer: Option<&str>,
    file_idx: usize,
    imports: &[Import],
    cfg: &CorpusConfig,
) {
    let kind = match node.kind() {
        "class_declaration" => TypeKind::Class,
        "interface_declaration" => TypeKind::Interface,
        "enum_declaration" => TypeKind::Enum,
        "record_declaration" => TypeKind::Record,
        _ => return,
    };
    let Some(name_node) = node.child_by_field_name("name") else {
        return;
    };
    let simple_name = jast::text(name_node, source).to_string();
    let local_name = match outer {
        Some(prefix) => format!("{prefix}.{simple_name}"),
        None => simple_name.clone(),
    };
    let fqcn = if package.is_empty() {
        local_name.clone()
    } else {
        format!("{package}.{local_name}")
    };

    let mut record = ClassRecord {
        fqcn: fqcn.clone(),
        simple_name: simple_name.clone(),
        kind,
        file_idx,
        superclass: superclass_name(node, source),
        interfaces: interface_names(node, source),
        resolved_super: None,
        resolved_interfaces: Vec::new(),
        type_params: type_params(node, source),
        fields: Vec::new(),
        method_idxs: Vec::new(),
        line: node.start_position().row as u32 + 1,
    };

    let Some(body) = node.child_by_field_name("body") else {
        index.classes.insert(fqcn, record);
        return;
    };

    // Records declare their components as implicit final instance fields.
    if kind == TypeKind::Record {
        if let Some(params) = node.child_by_field_name("parameters") {
            for p in jast::named_children(params) {
                if let (Some(t), Some(n)) =
                    (p.child_by_field_name("type"), p.child_by_field_name("name"))
                {
                    record.fields.push(FieldRecord {
                        name: jast::text(n, source).to_string(),
                        type_name: normalize_type(jast::text(t, source)),
                        is_static: false,
                        is_private: true,
                    });
                }
            }
        }
    }

    let members = body_members(body);
    for member in &members {
        if member.kind() == "field_declaration" {
            let mods = modifier_words(*member, source);
            // Interface fields are implicitly public static final.
            let is_static = mods.contains("static") || kind == TypeKind::Interface;
            let is_private = mods.contains("private");
            let Some(type_node) = member.child_by_field_name("type") else {
                continue;
            };
            let type_name = normalize_type(jast::text(type_node, source));
            for decl in jast::named_children(*member) {
                if decl.kind() == "variable_declarator" {
                    if let Some(n) = decl.child_by_field_name("name") {
                        record.fields.push(FieldRecord {
                            name: jast::text(n, source).to_string(),
                            type_name: type_name.clone(),
                            is_static,
                            is_private,
                        });
                    }
                }
            }
        }
    }

    for member in &members {
        match member.kind() {
            "method_declaration" | "constructor_declaration" => {
                let method_idx = index.methods.len();
                let method = extract_method(
                    *member,
                    source,
                    source_lines,
                    &record,
                    imports,
                    cfg,
                    &mut index.diagnostics,
                );
                record.method_idxs.push(method_idx);
                index.methods.push(method);
            }
            _ => {}
        }
    }

    index.classes.insert(fqcn.clone(), record);

    for member in members {
        match member.kind() {
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" => {
                index_type(
                    index,
                    member,
                    source,
                    source_lines,
                    package,
                    Some(&local_name),
                    file_idx,
                    imports,
                    cfg,
                );
            }
            _ => {}
        }
    }
}

/// Direct members of a class/interface/enum body. Enum members live under a
/// nested `enum_body_declarations` node.
fn body_members<'t>(body: Node<'t>) -> Vec<Node<'t>> {
    let mut members = Vec::new();
    for child in jast::named_children(body) {
        if child.kind() == "enum_body_declarations" {
            members.extend(jast::named_children(child));
        } else {
            members.push(child);
        }
    }
    members
}

fn superclass_name(node: Node<'_>, source: &str) -> Option<String> {
    let sc = node.child_by_field_name("superclass")?;
    jast::named_children(sc)
        .into_iter()
        .next_back()
        .map(|t| normalize_type(jast::text(t, source)))
}

fn interface_names(node: Node<'_>, source: &str) -> Vec<String> {
    let mut names = Vec::new();
    for child in jast::children(node) {
        if child.kind() == "super_interfaces" || child.kind() == "extends_interfaces" {
            if let Some(list) = jast::named_children(child).into_iter().next() {
                for t in jast::named_children(list) {
                    names.push(normalize_type(jast::text(t, source)));
                }
            }
        }
    }
    names
}

fn type_params(node: Node<'_>, source: &str) -> Vec<TypeParam> {
    let Some(params) = node.child_by_field_name("type_parameters") else {
        return Vec::new();
    };
    jast::named_children(params)
        .into_iter()
        .filter(|p| p.kind() == "type_parameter")
        .map(|p| {
            let name = jast::named_children(p)
                .into_iter()
                .find(|c| c.kind() == "type_identifier" || c.kind() == "identifier")
                .map(|n| jast::text(n, source).to_string())
                .unwrap_or_default();
            let bound = jast::children(p)
                .into_iter()
                .find(|c| c.kind() == "type_bound")
                .and_then(|b| jast::named_children(b).into_iter().next())
                .map(|t| normalize_type(jast::text(t, source)));
            TypeParam { name, bound }
        })
        .collect()
}

fn modifier_words(node: Node<'_>, source: &str) -> BTreeSet<String> {
    jast::children(node)
        .into_iter()
        .filter(|c| c.kind() == "modifiers")
        .flat_map(|m| {
            jast::text(m, source)
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Normalizes a type as written: whitespace removed, generics kept.
fn normalize_type(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Type rendering used inside method ids: generics stripped, arrays and
/// varargs markers kept, so `List<String>` ids as `List` but `int[]` stays.
fn id_type(type_name: &str) -> String {
    let normalized = normalize_type(type_name);
    let mut out = String::new();
    let mut depth = 0usize;
    for c in normalized.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn extract_method(
    node: Node<'_>,
    source: &str,
    source_lines: &[&str],
    class: &ClassRecord,
    imports: &[Import],
    cfg: &CorpusConfig,
    diagnostics: &mut Diagnostics,
) -> MethodRecord {
    let is_ctor = node.kind() == "constructor_declaration";
    let name = if is_ctor {
        "<init>".to_string()
    } else {
        node.child_by_field_name("name")
            .map(|n| jast::text(n, source).to_string())
            .unwrap_or_default()
    };
    let display_name = if is_ctor { &class.simple_name } else { &name };
    let mods = modifier_words(node, source);
    let is_static = mods.contains("static");
    let is_private = mods.contains("private");

    let mut parameters = Vec::new();
    if let Some(params) = node.child_by_field_name("parameters") {
        for p in jast::named_children(params) {
            match p.kind() {
                "formal_parameter" => {
                    if let (Some(t), Some(n)) =
                        (p.child_by_field_name("type"), p.child_by_field_name("name"))
                    {
                        parameters.push(Param {
                            name: jast::text(n, source).to_string(),
                            type_name: normalize_type(jast::text(t, source)),
                        });
                    }
                }
                "spread_parameter" => {
                    let children = jast::named_children(p);
                    let type_name = children
                        .first()
                        .map(|t| format!("{}...", normalize_type(jast::text(*t, source))))
                        .unwrap_or_default();
                    let pname = children
                        .iter()
                        .find(|c| c.kind() == "variable_declarator")
                        .and_then(|d| d.child_by_field_name("name"))
                        .map(|n| jast::text(n, source).to_string())
                        .unwrap_or_default();
                    parameters.push(Param {
                        name: pname,
                        type_name,
                    });
                }
                _ => {}
            }
        }
    }

    let return_type = if is_ctor {
        String::new()
    } else {
        node.child_by_field_name("type")
            .map(|t| normalize_type(jast::text(t, source)))
            .unwrap_or_default()
    };

    let param_ids: Vec<String> = parameters.iter().map(|p| id_type(&p.type_name)).collect();
    let id = format!("{}#{}({})", class.fqcn, name, param_ids.join(","));
    let signature = {
        let rendered: Vec<String> = parameters
            .iter()
            .map(|p| format!("{} {}", p.type_name, p.name))
            .collect();
        if is_ctor {
            format!("{display_name}({})", rendered.join(", "))
        } else {
            format!("{return_type} {display_name}({})", rendered.join(", "))
        }
    };

    let start_row = node.start_position().row;
    let end_row = node.end_position().row;
    let source_text = source_lines[start_row..=end_row.min(source_lines.len() - 1)].join("\n");

    let mut method = MethodRecord {
        id,
        name,
        class_fqcn: class.fqcn.clone(),
        file_idx: class.file_idx,
        signature,
        parameters,
        return_type,
        is_static,
        is_private,
        has_body: false,
        start_line: start_row as u32 + 1,
        end_line: end_row as u32 + 1,
        source_text,
        type_params: type_params(node, source),
        locals: Vec::new(),
        logging_statements: Vec::new(),
        call_sites: Vec::new(),
        flow: FlowNode::Empty,
    };

    let Some(body) = node.child_by_field_name("body") else {
        return method;
    };
    method.has_body = true;

    collect_locals(body, source, &mut method.locals);

    let recognizer = Recognizer::new(cfg, imports, class, &method);
    let mut cx = BodyCx {
        source,
        method_start_row: start_row,
        recognizer,
        logs: Vec::new(),
        calls: Vec::new(),
        diagnostics,
    };
    let flow = walk_statement(&mut cx, body);
    method.logging_statements = cx.logs;
    method.call_sites = cx.calls;
    method.flow = flow;
    method
}

fn collect_locals(node: Node<'_>, source: &str, out: &mut Vec<LocalVar>) {
    match node.kind() {
        "local_variable_declaration" | "resource" => {
            if let Some(t) = node.child_by_field_name("type") {
                let type_name = normalize_type(jast::text(t, source));
                if node.kind() == "resource" {
                    if let Some(n) = node.child_by_field_name("name") {
                        out.push(LocalVar {
                            name: jast::text(n, source).to_string(),
                            type_name,
                        });
                    }
                } else {
                    for decl in jast::named_children(node) {
                        if decl.kind() == "variable_declarator" {
                            if let Some(n) = decl.child_by_field_name("name") {
                                out.push(LocalVar {
                                    name: jast::text(n, source).to_string(),
                                    type_name: type_name.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        "enhanced_for_statement" | "catch_formal_parameter" => {
            if let (Some(t), Some(n)) = (
                node.child_by_field_name("type")
                    .or_else(|| jast::named_children(node).into_iter().next()),
                node.child_by_field_name("name"),
            ) {
                out.push(LocalVar {
                    name: jast::text(n, source).to_string(),
                    type_name: normalize_type(jast::text(t, source)),
                });
            }
        }
        // Anonymous class bodies belong to other (unindexed) scopes.
        "class_body" => return,
        _ => {}
    }
    for child in jast::named_children(node) {
        collect_locals(child, source, out);
    }
}

/// Logger recognition context for one method body.
struct Recognizer {
    logger_names: BTreeSet<String>,
    has_logging_import: bool,
    // Identifier -> declared type, innermost first (params/locals over fields).
    declared_types: BTreeMap<String, String>,
}

const LOGGING_IMPORT_PREFIXES: [&str; 3] =
    ["org.slf4j", "org.apache.log4j", "org.apache.logging.log4j"];

impl Recognizer {
    fn new(
        cfg: &CorpusConfig,
        imports: &[Import],
        class: &ClassRecord,
        method: &MethodRecord,
    ) -> Self {
        let has_logging_import = imports.iter().any(|imp| {
            LOGGING_IMPORT_PREFIXES
                .iter()
                .any(|prefix| imp.path.starts_with(prefix))
        });
        let mut declared_types = BTreeMap::new();
        for field in &class.fields {
            declared_types.insert(field.name.clone(), field.type_name.clone());
        }
        for local in &method.locals {
            declared_types.insert(local.name.clone(), local.type_name.clone());
        }
        for param in &method.parameters {
            declared_types.insert(param.name.clone(), param.type_name.clone());
        }
        Recognizer {
            logger_names: cfg.logger_receiver_names.clone(),
            has_logging_import,
            declared_types,
        }
    }

    /// Decides whether `receiver.name(..)` is a logging call and returns its
    /// level. Receiver must be an identifier or `this.<identifier>`; either
    /// its simple name is a configured logger name, or its declared type is a
    /// logger type from an imported logging package.
    fn recognize(&self, receiver: Option<&str>, name: &str) -> Option<Level> {
        let level: Level = name.parse().ok()?;
        let receiver = receiver?;
        let simple = receiver.strip_prefix("this.").unwrap_or(receiver);
        if simple.contains('.') {
            // Qualified receivers like org.slf4j.LoggerFactory style chains
            // are out of scope for the recognizer.
            return None;
        }
        if self.logger_names.contains(simple) {
            return Some(level);
        }
        let declared = self.declared_types.get(simple)?;
        let base = base_type_name(declared);
        let is_logger_type = matches!(base, "Logger" | "Log")
            || LOGGING_IMPORT_PREFIXES
                .iter()
                .any(|prefix| declared.starts_with(prefix));
        if is_logger_type
            && (self.has_logging_import
                || LOGGING_IMPORT_PREFIXES
                    .iter()
                    .any(|prefix| declared.starts_with(prefix)))
        {
            Some(level)
        } else {
            None
        }
    }
}

struct BodyCx<'a, 'd> {
    source: &'a str,
    method_start_row: usize,
    recognizer: Recognizer,
    logs: Vec<LoggingStatement>,
    calls: Vec<CallSiteRecord>,
    diagnostics: &'d mut Diagnostics,
}

impl BodyCx<'_, '_> {
    fn rel_line(&self, row: usize) -> u32 {
        (row - self.method_start_row) as u32 + 1
    }
}

fn seq_of(mut nodes: Vec<FlowNode>) -> FlowNode {
    nodes.retain(|n| !matches!(n, FlowNode::Empty));
    match nodes.len() {
        0 => FlowNode::Empty,
        1 => nodes.pop().expect("length checked"),
        _ => FlowNode::Seq(nodes),
    }
}

fn walk_statement(cx: &mut BodyCx<'_, '_>, node: Node<'_>) -> FlowNode {
    match node.kind() {
        "block" | "constructor_body" => {
            let steps = jast::named_children(node)
                .into_iter()
                .map(|child| walk_statement(cx, child))
                .collect();
            seq_of(steps)
        }
        "expression_statement" => {
            let Some(expr) = jast::named_children(node).into_iter().next() else {
                return FlowNode::Empty;
            };
            if expr.kind() == "method_invocation" {
                let decomposed = decompose_invocation(expr, cx.source);
                if let Some(level) = cx
                    .recognizer
                    .recognize(decomposed.receiver.as_deref(), &decomposed.level_name)
                {
                    let log_idx = cx.logs.len();
                    let block = enclosing_block_id(cx, node);
                    let removable = node.parent().is_some_and(|p| {
                        p.kind() == "block" || p.kind() == "constructor_body"
                    });
                    cx.logs.push(LoggingStatement {
                        line: cx.rel_line(node.start_position().row),
                        end_line: cx.rel_line(node.end_position().row),
                        col: node.start_position().column as u32,
                        end_col: node.end_position().column as u32,
                        level,
                        raw_text: jast::text(node, cx.source).to_string(),
                        text_literals: decomposed.text_literals,
                        variable_exprs: decomposed.variable_exprs,
                        block_id: block,
                        removable,
                    });
                    // Calls inside the log's arguments still count for the
                    // call graph, but the statement is a single flow event.
                    collect_calls(cx, expr, true);
                    return FlowNode::Log(log_idx);
                }
            }
            seq_of(collect_calls(cx, expr, false))
        }
        "local_variable_declaration" => seq_of(collect_calls(cx, node, false)),
        "if_statement" => {
            let mut steps = Vec::new();
            let mut cond_value = None;
            if let Some(cond) = node.child_by_field_name("condition") {
                cond_value = jast::const_bool(cond, cx.source);
                steps.extend(collect_calls(cx, cond, false));
            }
            let then_flow = node
                .child_by_field_name("consequence")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            let else_flow = node
                .child_by_field_name("alternative")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            steps.push(FlowNode::Branch(vec![
                FlowArm {
                    feasible: cond_value,
                    body: then_flow,
                },
                FlowArm {
                    feasible: cond_value.map(|b| !b),
                    body: else_flow,
                },
            ]));
            seq_of(steps)
        }
        "while_statement" => {
            let mut steps = Vec::new();
            let mut cond_value = None;
            if let Some(cond) = node.child_by_field_name("condition") {
                cond_value = jast::const_bool(cond, cx.source);
                steps.extend(collect_calls(cx, cond, false));
            }
            let body = node
                .child_by_field_name("body")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            steps.push(loop_branch(cond_value, body));
            seq_of(steps)
        }
        "do_statement" => {
            // The body runs at least once; forward edges need no repeat pass.
            let body = node
                .child_by_field_name("body")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            let cond_calls = node
                .child_by_field_name("condition")
                .map(|c| collect_calls(cx, c, false))
                .unwrap_or_default();
            seq_of(vec![body, seq_of(cond_calls)])
        }
        "for_statement" => {
            let mut steps = Vec::new();
            if let Some(init) = node.child_by_field_name("init") {
                steps.extend(collect_calls(cx, init, false));
            }
            let mut cond_value = None;
            if let Some(cond) = node.child_by_field_name("condition") {
                cond_value = jast::const_bool(cond, cx.source);
                steps.extend(collect_calls(cx, cond, false));
            }
            let mut body_steps = vec![node
                .child_by_field_name("body")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty)];
            if let Some(update) = node.child_by_field_name("update") {
                body_steps.extend(collect_calls(cx, update, false));
            }
            steps.push(loop_branch(cond_value, seq_of(body_steps)));
            seq_of(steps)
        }
        "enhanced_for_statement" => {
            let mut steps = Vec::new();
            if let Some(value) = node.child_by_field_name("value") {
                steps.extend(collect_calls(cx, value, false));
            }
            let body = node
                .child_by_field_name("body")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            steps.push(loop_branch(None, body));
            seq_of(steps)
        }
        "switch_expression" | "switch_statement" => {
            let mut steps = Vec::new();
            if let Some(cond) = node.child_by_field_name("condition") {
                steps.extend(collect_calls(cx, cond, false));
            }
            let mut arms = Vec::new();
            let mut has_default = false;
            if let Some(body) = node.child_by_field_name("body") {
                for group in jast::named_children(body) {
                    if group.kind() != "switch_block_statement_group"
                        && group.kind() != "switch_rule"
                    {
                        continue;
                    }
                    if jast::text(group, cx.source).trim_start().starts_with("default") {
                        has_default = true;
                    }
                    let stmts = jast::named_children(group)
                        .into_iter()
                        .filter(|c| !c.kind().contains("label"))
                        .map(|c| walk_statement(cx, c))
                        .collect();
                    arms.push(FlowArm {
                        feasible: None,
                        body: seq_of(stmts),
                    });
                }
            }
            if !has_default {
                arms.push(FlowArm {
                    feasible: None,
                    body: FlowNode::Empty,
                });
            }
            if !arms.is_empty() {
                steps.push(FlowNode::Branch(arms));
            }
            seq_of(steps)
        }
        "try_statement" | "try_with_resources_statement" => {
            let mut steps = Vec::new();
            if let Some(resources) = node.child_by_field_name("resources") {
                steps.extend(collect_calls(cx, resources, false));
            }
            let body = node
                .child_by_field_name("body")
                .map(|n| walk_statement(cx, n))
                .unwrap_or(FlowNode::Empty);
            steps.push(body);
            // Catch clauses are modeled as optional continuations of the try
            // block; throw-to-catch edges themselves are not tracked.
            let mut arms = vec![FlowArm {
                feasible: None,
                body: FlowNode::Empty,
            }];
            let mut finally = FlowNode::Empty;
            for child in jast::named_children(node) {
                match child.kind() {
                    "catch_clause" => {
                        let catch_body = child
                            .child_by_field_name("body")
                            .map(|n| walk_statement(cx, n))
                            .unwrap_or(FlowNode::Empty);
                        arms.push(FlowArm {
                            feasible: None,
                            body: catch_body,
                        });
                    }
                    "finally_clause" => {
                        finally = jast::named_children(child)
                            .into_iter()
                            .find(|c| c.kind() == "block")
                            .map(|b| walk_statement(cx, b))
                            .unwrap_or(FlowNode::Empty);
                    }
                    _ => {}
                }
            }
            if arms.len() > 1 {
                steps.push(FlowNode::Branch(arms));
            }
            steps.push(finally);
            seq_of(steps)
        }
        "return_statement" | "throw_statement" => {
            let mut steps = collect_calls(cx, node, false);
            steps.push(FlowNode::Exit);
            seq_of(steps)
        }
        "break_statement" | "continue_statement" | "yield_statement" => FlowNode::Empty,
        "synchronized_statement" => {
            let mut steps = Vec::new();
            for child in jast::named_children(node) {
                if child.kind() == "parenthesized_expression" {
                    steps.extend(collect_calls(cx, child, false));
                } else if child.kind() == "block" {
                    steps.push(walk_statement(cx, child));
                }
            }
            seq_of(steps)
        }
        "labeled_statement" => jast::named_children(node)
            .into_iter()
            .next_back()
            .map(|inner| walk_statement(cx, inner))
            .unwrap_or(FlowNode::Empty),
        "class_declaration" | "interface_declaration" | "enum_declaration"
        | "record_declaration" | "local_class_declaration" => {
            cx.diagnostics.local_classes_skipped += 1;
            FlowNode::Empty
        }
        _ => seq_of(collect_calls(cx, node, false)),
    }
}

fn loop_branch(cond_value: Option<bool>, body: FlowNode) -> FlowNode {
    FlowNode::Branch(vec![
        FlowArm {
            feasible: cond_value,
            body,
        },
        FlowArm {
            feasible: cond_value.map(|b| !b),
            body: FlowNode::Empty,
        },
    ])
}

/// Records every call site under `node` (receivers and arguments first, so
/// event order approximates evaluation order) and returns the flow events.
fn collect_calls(cx: &mut BodyCx<'_, '_>, node: Node<'_>, in_log: bool) -> Vec<FlowNode> {
    let mut events = Vec::new();
    collect_calls_into(cx, node, in_log, &mut events);
    events
}

fn collect_calls_into(
    cx: &mut BodyCx<'_, '_>,
    node: Node<'_>,
    in_log: bool,
    events: &mut Vec<FlowNode>,
) {
    match node.kind() {
        "method_invocation" => {
            for child in jast::named_children(node) {
                collect_calls_into(cx, child, in_log, events);
            }
            let site = call_site_from_invocation(cx, node);
            let idx = cx.calls.len();
            cx.calls.push(site);
            if !in_log {
                events.push(FlowNode::Call(idx));
            }
        }
        "object_creation_expression" => {
            let mut anonymous = false;
            for child in jast::named_children(node) {
                if child.kind() == "class_body" {
                    anonymous = true;
                    continue;
                }
                collect_calls_into(cx, child, in_log, events);
            }
            if anonymous {
                cx.diagnostics.anonymous_bodies_skipped += 1;
            }
            let type_name = node
                .child_by_field_name("type")
                .map(|t| id_type(jast::text(t, cx.source)))
                .unwrap_or_default();
            let (arg_count, arg_texts) = argument_facts(cx, node);
            let idx = cx.calls.len();
            cx.calls.push(CallSiteRecord {
                line: cx.rel_line(node.start_position().row),
                name: "<init>".to_string(),
                receiver: Receiver::NewType(type_name),
                arg_count,
                arg_texts,
                in_log,
            });
            if !in_log {
                events.push(FlowNode::Call(idx));
            }
        }
        "explicit_constructor_invocation" => {
            for child in jast::named_children(node) {
                if child.kind() == "argument_list" {
                    collect_calls_into(cx, child, in_log, events);
                }
            }
            let receiver = if jast::text(node, cx.source).trim_start().starts_with("super") {
                Receiver::Super
            } else {
                Receiver::This
            };
            let (arg_count, arg_texts) = argument_facts(cx, node);
            let idx = cx.calls.len();
            cx.calls.push(CallSiteRecord {
                line: cx.rel_line(node.start_position().row),
                name: "<init>".to_string(),
                receiver,
                arg_count,
                arg_texts,
                in_log,
            });
            if !in_log {
                events.push(FlowNode::Call(idx));
            }
        }
        // Skip anonymous/local type bodies; their members are other scopes.
        "class_body" | "interface_body" | "enum_body" => {}
        _ => {
            for child in jast::named_children(node) {
                collect_calls_into(cx, child, in_log, events);
            }
        }
    }
}

fn argument_facts(cx: &BodyCx<'_, '_>, node: Node<'_>) -> (usize, Vec<String>) {
    let Some(args) = node.child_by_field_name("arguments") else {
        return (0, Vec::new());
    };
    let texts: Vec<String> = jast::named_children(args)
        .into_iter()
        .map(|a| normalize_type(jast::text(a, cx.source)))
        .collect();
    (texts.len(), texts)
}

fn call_site_from_invocation(cx: &BodyCx<'_, '_>, node: Node<'_>) -> CallSiteRecord {
    let name = node
        .child_by_field_name("name")
        .map(|n| jast::text(n, cx.source).to_string())
        .unwrap_or_default();
    let receiver = node
        .child_by_field_name("object")
        .map(|obj| receiver_shape(cx, obj))
        .unwrap_or(Receiver::Implicit);
    let (arg_count, arg_texts) = argument_facts(cx, node);
    CallSiteRecord {
        line: cx.rel_line(node.start_position().row),
        name,
        receiver,
        arg_count,
        arg_texts,
        in_log: false,
    }
}

fn receiver_shape(cx: &BodyCx<'_, '_>, node: Node<'_>) -> Receiver {
    match node.kind() {
        "identifier" => Receiver::Name(jast::text(node, cx.source).to_string()),
        "this" => Receiver::This,
        "super" => Receiver::Super,
        "field_access" => {
            let text = jast::text(node, cx.source);
            if text
                .chars()
                .all(|c| c.is_alphanumeric() || c == '.' || c == '_' || c == '$')
                || text.starts_with("this.")
            {
                Receiver::Path(normalize_type(text))
            } else {
                Receiver::Opaque
            }
        }
        "method_invocation" => {
            let base = node
                .child_by_field_name("object")
                .map(|obj| receiver_shape(cx, obj))
                .unwrap_or(Receiver::Implicit);
            let name = node
                .child_by_field_name("name")
                .map(|n| jast::text(n, cx.source).to_string())
                .unwrap_or_default();
            let arg_count = node
                .child_by_field_name("arguments")
                .map(|a| jast::named_children(a).len())
                .unwrap_or(0);
            Receiver::Call {
                base: Box::new(base),
                name,
                arg_count,
            }
        }
        "object_creation_expression" => {
            let type_name = node
                .child_by_field_name("type")
                .map(|t| id_type(jast::text(t, cx.source)))
                .unwrap_or_default();
            Receiver::NewType(type_name)
        }
        "parenthesized_expression" => jast::named_children(node)
            .into_iter()
            .next()
            .map(|inner| receiver_shape(cx, inner))
            .unwrap_or(Receiver::Opaque),
        _ => Receiver::Opaque,
    }
}

fn enclosing_block_id(cx: &BodyCx<'_, '_>, node: Node<'_>) -> String {
    let mut cur = node.parent();
    while let Some(n) = cur {
        if n.kind() == "block" || n.kind() == "constructor_body" {
            return format!(
                "B{}-{}",
                cx.rel_line(n.start_position().row),
                cx.rel_line(n.end_position().row)
            );
        }
        cur = n.parent();
    }
    "B0-0".to_string()
}
