//! Variables visible to a method, and type definitions for refinement.
//!
//! The scope listing unions five sources: parameters, locals, the class's
//! own instance and static fields, and non-private fields inherited from
//! project superclasses. Type definitions fold a class's hierarchy into a
//! flat member view so a second generation pass can judge which accessors
//! exist on a logged variable.

use crate::callgraph::field_type_in_hierarchy;
use crate::corpus::{base_type_name, MethodRecord, ProjectIndex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum ScopeVarsError {
    #[error("variable {name} is not declared in any scope of {method}")]
    UnresolvedVariable { name: String, method: String },
    #[error("no project definition found for type {type_name}")]
    DefinitionNotFound { type_name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarOrigin {
    Param,
    Local,
    /// Instance field of the enclosing class.
    Member,
    /// Static field of the enclosing class.
    Static,
    /// Field declared by a project superclass.
    Inherited,
}

impl fmt::Display for VarOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = match self {
            VarOrigin::Param => "param",
            VarOrigin::Local => "local",
            VarOrigin::Member => "member",
            VarOrigin::Static => "static",
            VarOrigin::Inherited => "inherited",
        };
        f.write_str(word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub name: String,
    pub type_name: String,
    pub origin: VarOrigin,
}

/// Everything nameable from inside `method`, deduplicated by name and
/// origin, ordered innermost scope first. A static method sees no
/// instance state, so instance fields (own or inherited) are left out.
///
/// All locals are listed regardless of where in the body they are
/// declared, because the statement being generated has no fixed position
/// yet; use-before-declaration is the refinement pass's problem.
pub fn collect_scope_variables(method: &MethodRecord, index: &ProjectIndex) -> Vec<VariableEntry> {
    let mut entries = Vec::new();
    let mut seen: BTreeSet<(String, VarOrigin)> = BTreeSet::new();
    let mut push = |entries: &mut Vec<VariableEntry>, name: &str, type_name: &str, origin| {
        if seen.insert((name.to_string(), origin)) {
            entries.push(VariableEntry {
                name: name.to_string(),
                type_name: type_name.to_string(),
                origin,
            });
        }
    };

    for p in &method.parameters {
        push(&mut entries, &p.name, &p.type_name, VarOrigin::Param);
    }
    for l in &method.locals {
        push(&mut entries, &l.name, &l.type_name, VarOrigin::Local);
    }
    if let Some(class) = index.classes.get(&method.class_fqcn) {
        for f in &class.fields {
            if f.is_static {
                push(&mut entries, &f.name, &f.type_name, VarOrigin::Static);
            } else if !method.is_static {
                push(&mut entries, &f.name, &f.type_name, VarOrigin::Member);
            }
        }
    }
    for super_fqcn in index.superclass_chain(&method.class_fqcn) {
        let Some(super_class) = index.classes.get(&super_fqcn) else {
            continue;
        };
        for f in &super_class.fields {
            if f.is_private || (method.is_static && !f.is_static) {
                continue;
            }
            push(&mut entries, &f.name, &f.type_name, VarOrigin::Inherited);
        }
    }
    entries
}

/// One line per visible variable, shadowing resolved: when a name appears
/// in several scopes, only the innermost declaration is printed.
pub fn render_variable_list(entries: &[VariableEntry]) -> String {
    let mut seen_names = BTreeSet::new();
    let mut lines = Vec::new();
    for e in entries {
        if seen_names.insert(e.name.as_str()) {
            lines.push(format!("- {}: {} ({})", e.name, e.type_name, e.origin));
        }
    }
    lines.join("\n")
}

/// Declared type of an identifier as seen from `method`: parameters win
/// over locals, locals over fields, own fields over inherited ones. A
/// type-parameter type collapses to its first bound (`Object` when
/// unbounded) so that definition lookup has something concrete to chase.
pub fn resolve_variable_type(
    expr_base: &str,
    method: &MethodRecord,
    index: &ProjectIndex,
) -> Result<String, ScopeVarsError> {
    let name = expr_base.strip_prefix("this.").unwrap_or(expr_base);
    let declared = method
        .parameters
        .iter()
        .find(|p| p.name == name)
        .map(|p| p.type_name.clone())
        .or_else(|| {
            method
                .locals
                .iter()
                .find(|l| l.name == name)
                .map(|l| l.type_name.clone())
        })
        .or_else(|| field_type_in_hierarchy(index, &method.class_fqcn, name))
        .ok_or_else(|| ScopeVarsError::UnresolvedVariable {
            name: name.to_string(),
            method: method.id.clone(),
        })?;
    Ok(substitute_type_param(&declared, method, index))
}

/// Replaces a bare type-parameter name with its declared bound.
fn substitute_type_param(declared: &str, method: &MethodRecord, index: &ProjectIndex) -> String {
    let base = base_type_name(declared);
    let from_method = method.type_params.iter().find(|tp| tp.name == base);
    let from_class = index
        .classes
        .get(&method.class_fqcn)
        .and_then(|c| c.type_params.iter().find(|tp| tp.name == base));
    match from_method.or(from_class) {
        Some(tp) => tp.bound.clone().unwrap_or_else(|| "Object".to_string()),
        None => declared.to_string(),
    }
}

/// First identifier of a variable expression: `service.getName()` yields
/// `service`, `this.count` yields `count`. Literals and expressions that
/// do not start with an identifier yield nothing.
pub fn base_identifier(expr: &str) -> Option<&str> {
    let trimmed = expr.trim().strip_prefix("this.").unwrap_or(expr.trim());
    let end = trimmed
        .find(|c: char| !c.is_alphanumeric() && c != '_' && c != '$')
        .unwrap_or(trimmed.len());
    let head = &trimmed[..end];
    let starts_like_identifier = head
        .chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$');
    (starts_like_identifier && !matches!(head, "true" | "false" | "null" | "new"))
        .then_some(head)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberFunction {
    pub name: String,
    pub params: Vec<String>,
    pub return_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub type_name: String,
}

/// Flattened view of a project type: every member function and attribute
/// reachable through its hierarchy, most-derived declaration winning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDefinition {
    pub type_name: String,
    pub member_functions: Vec<MemberFunction>,
    pub attributes: Vec<Attribute>,
    /// Project supertypes whose members were folded in, nearest first.
    pub supertypes: Vec<String>,
}

/// Looks up `type_name` among project classes and folds its hierarchy
/// into one definition. Accepts a fully qualified name or a simple name;
/// an ambiguous simple name resolves to the lexicographically first
/// candidate. External and JDK types have no project definition and fail
/// with `DefinitionNotFound`, which callers treat as "no type info".
pub fn resolve_class_definition(
    type_name: &str,
    index: &ProjectIndex,
) -> Result<TypeDefinition, ScopeVarsError> {
    let base = base_type_name(type_name);
    let fqcn = if index.classes.contains_key(base) {
        base.to_string()
    } else {
        let simple = base.rsplit('.').next().unwrap_or(base);
        index
            .classes_named(simple)
            .first()
            .cloned()
            .ok_or_else(|| ScopeVarsError::DefinitionNotFound {
                type_name: type_name.to_string(),
            })?
    };

    let mut functions: Vec<MemberFunction> = Vec::new();
    let mut function_keys: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut attribute_names: BTreeSet<String> = BTreeSet::new();
    let mut supertypes = Vec::new();

    // Nearest-first walk, so a subclass declaration registers its key
    // before the superclass version shows up.
    for (depth, class_fqcn) in hierarchy_nearest_first(index, &fqcn).into_iter().enumerate() {
        let Some(class) = index.classes.get(&class_fqcn) else {
            continue;
        };
        if depth > 0 {
            supertypes.push(class_fqcn.clone());
        }
        for &m_idx in &class.method_idxs {
            let m = &index.methods[m_idx];
            if m.name == "<init>" {
                continue;
            }
            if depth > 0 && m.is_private {
                continue;
            }
            let params: Vec<String> = m
                .parameters
                .iter()
                .map(|p| base_type_name(&p.type_name).to_string())
                .collect();
            let key = (m.name.clone(), params.clone());
            if function_keys.insert(key) {
                functions.push(MemberFunction {
                    name: m.name.clone(),
                    params,
                    return_type: m.return_type.clone(),
                });
            }
        }
        for f in &class.fields {
            if depth > 0 && f.is_private {
                continue;
            }
            if attribute_names.insert(f.name.clone()) {
                attributes.push(Attribute {
                    name: f.name.clone(),
                    type_name: f.type_name.clone(),
                });
            }
        }
    }

    Ok(TypeDefinition {
        type_name: fqcn,
        member_functions: functions,
        attributes,
        supertypes,
    })
}

/// The type itself, then superclasses and interfaces breadth-first.
fn hierarchy_nearest_first(index: &ProjectIndex, fqcn: &str) -> Vec<String> {
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

/// Renders the definition as the refinement prompt expects it: the type
/// name, its attributes, then its member function signatures.
pub fn render_type_definition(def: &TypeDefinition) -> String {
    let mut out = format!("Type {}:", def.type_name);
    if def.attributes.is_empty() && def.member_functions.is_empty() {
        out.push_str("\n  (no project-visible members)");
        return out;
    }
    out.push_str("\nattributes:");
    if def.attributes.is_empty() {
        out.push_str("\n  (none)");
    }
    for a in &def.attributes {
        out.push_str(&format!("\n- {}: {}", a.name, a.type_name));
    }
    out.push_str("\nmethods:");
    if def.member_functions.is_empty() {
        out.push_str("\n  (none)");
    }
    for m in &def.member_functions {
        out.push_str(&format!(
            "\n- {} {}({})",
            m.return_type,
            m.name,
            m.params.join(", ")
        ));
    }
    out
}
