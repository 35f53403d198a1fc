//! Thin helpers over the Java grammar used by the corpus indexer and the
//! statement decomposer. Internal; the public API never exposes parser types.

use tree_sitter::{Node, Parser, Tree};

pub(crate) fn parser() -> Parser {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar is compiled in and version-compatible");
    parser
}

pub(crate) fn parse(source: &str) -> Option<Tree> {
    parser().parse(source, None)
}

pub(crate) fn text<'a>(node: Node<'_>, source: &'a str) -> &'a str {
    node.utf8_text(source.as_bytes()).unwrap_or("")
}

pub(crate) fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

pub(crate) fn children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

/// Depth-first search for the first node of `kind` below (and including) `node`.
pub(crate) fn find_first<'t>(node: Node<'t>, kind: &str) -> Option<Node<'t>> {
    if node.kind() == kind {
        return Some(node);
    }
    for child in children(node) {
        if let Some(found) = find_first(child, kind) {
            return Some(found);
        }
    }
    None
}

/// Wraps a bare method (or statement) so it parses as a compilation unit.
/// The wrapper adds exactly one line above the payload, so payload line `n`
/// sits at parse row `n` (rows are 0-based, payload lines 1-based).
pub(crate) fn wrap_in_class(payload: &str) -> String {
    format!("class __Wrap {{\n{payload}\n}}\n")
}

/// Wraps a statement inside a method inside a class. Adds one line above the
/// payload (the combined class and method header).
pub(crate) fn wrap_in_method(statement: &str) -> String {
    format!("class __Wrap {{ void __wrap() {{\n{statement}\n}} }}\n")
}

/// True when the literal text evaluates to a compile-time boolean constant.
/// Covers boolean literals, integer-literal comparisons, `!`, and parentheses;
/// anything else is treated as non-constant.
pub(crate) fn const_bool(node: Node<'_>, source: &str) -> Option<bool> {
    match node.kind() {
        "true" => Some(true),
        "false" => Some(false),
        "parenthesized_expression" => named_children(node)
            .first()
            .and_then(|inner| const_bool(*inner, source)),
        "unary_expression" => {
            let txt = text(node, source);
            if txt.starts_with('!') {
                named_children(node)
                    .first()
                    .and_then(|inner| const_bool(*inner, source))
                    .map(|b| !b)
            } else {
                None
            }
        }
        "binary_expression" => {
            let left = int_literal(node.child_by_field_name("left")?, source)?;
            let right = int_literal(node.child_by_field_name("right")?, source)?;
            let op = text(node.child_by_field_name("operator")?, source);
            match op {
                "<" => Some(left < right),
                "<=" => Some(left <= right),
                ">" => Some(left > right),
                ">=" => Some(left >= right),
                "==" => Some(left == right),
                "!=" => Some(left != right),
                _ => None,
            }
        }
        _ => None,
    }
}

fn int_literal(node: Node<'_>, source: &str) -> Option<i64> {
    match node.kind() {
        "decimal_integer_literal" => text(node, source).replace('_', "").parse().ok(),
        "parenthesized_expression" => named_children(node)
            .first()
            .and_then(|inner| int_literal(*inner, source)),
        _ => None,
    }
}
