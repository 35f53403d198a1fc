//! Turning raw model output into a structured logging statement.
//!
//! Two layers: [`parse_generation`] finds the `<line> <statement>` completion
//! line in a free-form response, and [`decompose_statement`] breaks a single
//! logging call into level, variable expressions, and text fragments. The
//! corpus indexer reuses the decomposer so ground-truth extraction and
//! prediction parsing cannot drift apart.

use crate::jast;
use crate::level::Level;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use tree_sitter::Node;

/// A completion reduced to its insertion line and statement text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedGeneration {
    /// 1-based line within the target method.
    pub line: u32,
    /// The statement exactly as the model wrote it, trailing semicolon kept.
    pub statement: String,
}

/// The response carried no line of the form `<integer> <statement ending in ;>`.
#[derive(Debug, Clone, thiserror::Error)]
#[error("no `<line> <statement;>` completion line in response")]
pub struct ParseFailure {
    pub raw: String,
}

/// The statement is not a single logging-style method call.
#[derive(Debug, Clone, thiserror::Error)]
#[error("not a single method-call statement: {reason}")]
pub struct MalformedStatement {
    pub reason: String,
}

/// A logging call split into the pieces the metrics compare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposedStatement {
    /// Receiver expression text, if the call has one (`LOG` in `LOG.info(..)`).
    pub receiver: Option<String>,
    /// Invoked method name as written (`info`, `warn`, ...).
    pub level_name: String,
    /// `level_name` parsed against the severity scale, when it is on it.
    pub level: Option<Level>,
    /// Non-literal argument and concatenation operand expressions, in source
    /// order, with all whitespace stripped.
    pub variable_exprs: Vec<String>,
    /// String-literal fragments in source order, quotes dropped, escapes as
    /// written. Format placeholders like `{}` stay in the fragment.
    pub text_literals: Vec<String>,
}

impl DecomposedStatement {
    /// The logged text: every literal fragment concatenated in order.
    pub fn text(&self) -> String {
        self.text_literals.concat()
    }
}

fn completion_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // `<12> LOG.info(x);`, `12: LOG.info(x);`, `12 LOG.info(x);` all match.
        Regex::new(r"^\s*<?(\d+)>?(?:\s*[:.)\-]\s*|\s+)(\S.*;)\s*$").unwrap()
    })
}

/// Extracts the first `<line> <statement>` pair from a raw model response.
///
/// Code fences and leading prose are stripped; the first line shaped like
/// `<integer> <statement ending in a semicolon>` wins. Everything else is a
/// [`ParseFailure`], which callers record per sample rather than abort on.
pub fn parse_generation(raw: &str) -> Result<ParsedGeneration, ParseFailure> {
    let body = strip_fences(raw);
    for line in body.lines() {
        if let Some(caps) = completion_line_re().captures(line) {
            if let Ok(line_no) = caps[1].parse::<u32>() {
                return Ok(ParsedGeneration {
                    line: line_no,
                    statement: caps[2].trim().to_string(),
                });
            }
        }
    }
    Err(ParseFailure {
        raw: raw.to_string(),
    })
}

/// Returns the fenced block's content when the response wraps its answer in
/// ``` fences, otherwise the response unchanged.
fn strip_fences(raw: &str) -> String {
    if !raw.contains("```") {
        return raw.to_string();
    }
    let mut inside = false;
    let mut kept = Vec::new();
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            if inside {
                break;
            }
            inside = true;
            continue;
        }
        if inside {
            kept.push(line);
        }
    }
    if kept.is_empty() {
        raw.to_string()
    } else {
        kept.join("\n")
    }
}

/// Parses one Java statement and decomposes the logging call inside it.
///
/// The statement must be a single expression statement whose expression is a
/// method invocation. Arguments are flattened through `+` concatenation
/// chains and parentheses: string literals become text fragments, other
/// literals are dropped, and every remaining operand is recorded as a
/// whitespace-stripped variable expression.
pub fn decompose_statement(statement: &str) -> Result<DecomposedStatement, MalformedStatement> {
    let trimmed = statement.trim();
    let padded;
    let stmt = if trimmed.ends_with(';') {
        trimmed
    } else {
        padded = format!("{trimmed};");
        &padded
    };
    let wrapped = jast::wrap_in_method(stmt);
    let tree = jast::parse(&wrapped).ok_or_else(|| MalformedStatement {
        reason: "parser produced no tree".to_string(),
    })?;
    if tree.root_node().has_error() {
        return Err(MalformedStatement {
            reason: "statement does not parse as Java".to_string(),
        });
    }
    // The statement must be the lone direct child of the wrapper method's
    // body; searching deeper would accept compound statements that merely
    // contain a call somewhere inside.
    let body = jast::find_first(tree.root_node(), "method_declaration")
        .and_then(|m| m.child_by_field_name("body"))
        .ok_or_else(|| MalformedStatement {
            reason: "statement did not parse inside the wrapper".to_string(),
        })?;
    let statements = jast::named_children(body);
    let invocation = match statements.as_slice() {
        [only] if only.kind() == "expression_statement" => {
            jast::named_children(*only).into_iter().next()
        }
        _ => None,
    }
    .filter(|expr| expr.kind() == "method_invocation")
    .ok_or_else(|| MalformedStatement {
        reason: "statement is not a single method invocation".to_string(),
    })?;
    Ok(decompose_invocation(invocation, &wrapped))
}

/// Decomposes an already-located `method_invocation` node. The corpus indexer
/// calls this directly on nodes from full-file parses.
pub(crate) fn decompose_invocation(invocation: Node<'_>, source: &str) -> DecomposedStatement {
    let receiver = invocation
        .child_by_field_name("object")
        .map(|obj| normalize_expr(jast::text(obj, source)));
    let level_name = invocation
        .child_by_field_name("name")
        .map(|name| jast::text(name, source).to_string())
        .unwrap_or_default();
    let mut variable_exprs = Vec::new();
    let mut text_literals = Vec::new();
    if let Some(args) = invocation.child_by_field_name("arguments") {
        for arg in jast::named_children(args) {
            flatten_operand(arg, source, &mut variable_exprs, &mut text_literals);
        }
    }
    let level = level_name.parse::<Level>().ok();
    DecomposedStatement {
        receiver,
        level_name,
        level,
        variable_exprs,
        text_literals,
    }
}

fn flatten_operand(
    node: Node<'_>,
    source: &str,
    variables: &mut Vec<String>,
    literals: &mut Vec<String>,
) {
    match node.kind() {
        "string_literal" => {
            let raw = jast::text(node, source);
            literals.push(unquote(raw));
        }
        "binary_expression" => {
            let op = node
                .child_by_field_name("operator")
                .map(|o| jast::text(o, source))
                .unwrap_or("");
            if op == "+" {
                if let (Some(left), Some(right)) = (
                    node.child_by_field_name("left"),
                    node.child_by_field_name("right"),
                ) {
                    flatten_operand(left, source, variables, literals);
                    flatten_operand(right, source, variables, literals);
                    return;
                }
            }
            variables.push(normalize_expr(jast::text(node, source)));
        }
        "parenthesized_expression" => {
            if let Some(inner) = jast::named_children(node).into_iter().next() {
                flatten_operand(inner, source, variables, literals);
            }
        }
        // Non-string literals carry no variable usage and no message text.
        "decimal_integer_literal"
        | "hex_integer_literal"
        | "octal_integer_literal"
        | "binary_integer_literal"
        | "decimal_floating_point_literal"
        | "hex_floating_point_literal"
        | "character_literal"
        | "true"
        | "false"
        | "null_literal" => {}
        _ => {
            variables.push(normalize_expr(jast::text(node, source)));
        }
    }
}

fn unquote(raw: &str) -> String {
    raw.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(raw)
        .to_string()
}

/// Strips every whitespace character so `service . getName ( )` and
/// `service.getName()` compare equal.
pub fn normalize_expr(expr: &str) -> String {
    expr.chars().filter(|c| !c.is_whitespace()).collect()
}
