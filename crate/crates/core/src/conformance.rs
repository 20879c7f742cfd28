//! Two-layer validation of populated clause JSON.
//!
//! The schema layer checks node kinds, enum membership and (in full mode)
//! required fields. The template layer checks that the document is exactly
//! the template skeleton with every placeholder filled and array exemplars
//! repeated zero or more times.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::schema::{NodeKind, SchemaGraph, SchemaNode};
use crate::template::{Placeholder, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationMode {
    /// Enforce required fields everywhere.
    Full,
    /// Kinds and enums only; required-field checks are waived.
    Template,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    KindMismatch,
    EnumMembership,
    MissingRequired,
    UnknownField,
    PlaceholderKind,
    UnfilledPlaceholder,
    ExtraneousField,
    MissingField,
    MissingPlaceholder,
    UnmappableEnum,
    InvalidJson,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Rule::KindMismatch => "kind mismatch",
            Rule::EnumMembership => "enum membership",
            Rule::MissingRequired => "missing required field",
            Rule::UnknownField => "unknown field",
            Rule::PlaceholderKind => "placeholder kind mismatch",
            Rule::UnfilledPlaceholder => "unfilled placeholder",
            Rule::ExtraneousField => "extraneous field",
            Rule::MissingField => "missing field",
            Rule::MissingPlaceholder => "missing placeholder",
            Rule::UnmappableEnum => "unmappable enum value",
            Rule::InvalidJson => "invalid JSON",
        };
        f.write_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "(root)" } else { &self.path };
        write!(f, "{path}: {} ({})", self.rule, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub schema_ok: bool,
    pub template_ok: bool,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Value>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.schema_ok && self.template_ok
    }

    /// Report for output that never produced a JSON value.
    pub fn unparsed(detail: impl Into<String>) -> Self {
        Self {
            schema_ok: false,
            template_ok: false,
            violations: vec![Violation { path: String::new(), rule: Rule::InvalidJson, detail: detail.into() }],
            normalized: None,
        }
    }
}

/// Full conformance check: normalize, then schema (full mode), then template.
pub fn check_conformance(value: &Value, graph: &SchemaGraph, template: &Template) -> ConformanceReport {
    let normalized = normalize(value, graph);
    let mut violations = normalized.violations;
    violations.extend(validate_against_schema(&normalized.value, graph, ValidationMode::Full));
    let schema_ok = violations.is_empty();
    let template_violations = validate_against_template(&normalized.value, template);
    let template_ok = template_violations.is_empty();
    violations.extend(template_violations);
    ConformanceReport {
        schema_ok,
        template_ok,
        violations,
        normalized: (schema_ok && template_ok).then_some(normalized.value),
    }
}

fn child_path(parent: &str, field: &str) -> String {
    if parent.is_empty() {
        field.to_string()
    } else {
        format!("{parent}/{field}")
    }
}

fn json_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn is_integral(n: &Number) -> bool {
    n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0)
}

/// Whether a concrete JSON value is acceptable for a leaf of `kind`.
fn leaf_accepts(kind: NodeKind, value: &Value) -> bool {
    match (kind, value) {
        (NodeKind::String | NodeKind::Enum, Value::String(_)) => true,
        (NodeKind::Number, Value::Number(_)) => true,
        (NodeKind::Integer, Value::Number(n)) => is_integral(n),
        (NodeKind::Boolean, Value::Bool(_)) => true,
        _ => false,
    }
}

pub fn validate_against_schema(value: &Value, graph: &SchemaGraph, mode: ValidationMode) -> Vec<Violation> {
    let mut out = Vec::new();
    schema_walk(value, graph.root(), graph, mode, "", &mut out);
    out
}

fn schema_walk(
    value: &Value,
    node: &SchemaNode,
    graph: &SchemaGraph,
    mode: ValidationMode,
    path: &str,
    out: &mut Vec<Violation>,
) {
    let push = |out: &mut Vec<Violation>, rule, detail: String| {
        out.push(Violation { path: path.to_string(), rule, detail })
    };
    let Some((node, _)) = graph.deref(node) else {
        push(out, Rule::KindMismatch, "schema reference loop has no structure".into());
        return;
    };

    match node {
        SchemaNode::Object { children, required } => {
            let Value::Object(map) = value else {
                push(out, Rule::KindMismatch, format!("expected object, found {}", json_kind(value)));
                return;
            };
            for (key, child_value) in map {
                match children.get(key) {
                    Some(child) => schema_walk(child_value, child, graph, mode, &child_path(path, key), out),
                    None => out.push(Violation {
                        path: child_path(path, key),
                        rule: Rule::UnknownField,
                        detail: "field is not defined by the schema".into(),
                    }),
                }
            }
            if mode == ValidationMode::Full {
                for name in required.iter().filter(|name| !map.contains_key(*name)) {
                    out.push(Violation {
                        path: child_path(path, name),
                        rule: Rule::MissingRequired,
                        detail: "required by the schema".into(),
                    });
                }
            }
        }
        SchemaNode::Array { item } => {
            let Value::Array(items) = value else {
                push(out, Rule::KindMismatch, format!("expected array, found {}", json_kind(value)));
                return;
            };
            for (i, element) in items.iter().enumerate() {
                schema_walk(element, item, graph, mode, &format!("{path}[{i}]"), out);
            }
        }
        leaf => {
            let kind = leaf.kind();
            if let Some(placeholder) = Placeholder::from_value(value) {
                if placeholder.kind != kind {
                    push(out, Rule::PlaceholderKind, format!("{} placeholder in a {kind} field", placeholder.kind));
                }
                return;
            }
            if !leaf_accepts(kind, value) {
                push(out, Rule::KindMismatch, format!("expected {kind}, found {}", json_kind(value)));
                return;
            }
            if let (SchemaNode::Enum { values }, Value::String(s)) = (leaf, value) {
                if !values.contains(s) {
                    push(out, Rule::EnumMembership, format!("`{s}` is not one of {}", values.join(", ")));
                }
            }
        }
    }
}

pub fn validate_against_template(value: &Value, template: &Template) -> Vec<Violation> {
    let mut out = Vec::new();
    template_walk(value, &template.skeleton, "", &mut out);
    out
}

fn template_walk(value: &Value, skeleton: &Value, path: &str, out: &mut Vec<Violation>) {
    let push = |out: &mut Vec<Violation>, rule, detail: String| {
        out.push(Violation { path: path.to_string(), rule, detail })
    };
    match skeleton {
        Value::Object(shape) => {
            let Value::Object(map) = value else {
                push(out, Rule::KindMismatch, format!("expected object, found {}", json_kind(value)));
                return;
            };
            for (key, child) in map {
                match shape.get(key) {
                    Some(expected) => template_walk(child, expected, &child_path(path, key), out),
                    None => out.push(Violation {
                        path: child_path(path, key),
                        rule: Rule::ExtraneousField,
                        detail: "field is not part of the template".into(),
                    }),
                }
            }
            for (key, expected) in shape.iter().filter(|(key, _)| !map.contains_key(*key)) {
                let rule = if Placeholder::from_value(expected).is_some() {
                    Rule::MissingPlaceholder
                } else {
                    Rule::MissingField
                };
                out.push(Violation { path: child_path(path, key), rule, detail: "absent from output".into() });
            }
        }
        Value::Array(exemplars) => {
            let Value::Array(items) = value else {
                push(out, Rule::KindMismatch, format!("expected array, found {}", json_kind(value)));
                return;
            };
            for (i, item) in items.iter().enumerate() {
                let at = format!("{path}[{i}]");
                match exemplars.first() {
                    Some(exemplar) => template_walk(item, exemplar, &at, out),
                    None => out.push(Violation {
                        path: at,
                        rule: Rule::ExtraneousField,
                        detail: "template array has no exemplar".into(),
                    }),
                }
            }
        }
        _ => match Placeholder::from_value(skeleton) {
            Some(placeholder) => {
                if value.as_str().is_some_and(Placeholder::looks_like_sentinel) {
                    push(out, Rule::UnfilledPlaceholder, format!("`{}` was not replaced", value.as_str().unwrap()));
                } else if !leaf_accepts(placeholder.kind, value) {
                    push(
                        out,
                        Rule::KindMismatch,
                        format!("expected {}, found {}", placeholder.kind, json_kind(value)),
                    );
                }
            }
            None if value != skeleton => {
                push(out, Rule::KindMismatch, format!("expected literal {skeleton}"));
            }
            None => {}
        },
    }
}

/// Result of [`normalize`]: the canonical value plus anything that could not be mapped.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub value: Value,
    pub violations: Vec<Violation>,
}

/// Canonicalizes currencies, numbers and enum spellings. Idempotent.
pub fn normalize(value: &Value, graph: &SchemaGraph) -> Normalized {
    let mut violations = Vec::new();
    let value = normalize_walk(value, graph.root(), graph, "", None, &mut violations);
    Normalized { value, violations }
}

fn is_currency_field(field: Option<&str>) -> bool {
    field.is_some_and(|name| name == "currency" || name.ends_with("Currency"))
}

fn normalize_walk(
    value: &Value,
    node: &SchemaNode,
    graph: &SchemaGraph,
    path: &str,
    field: Option<&str>,
    violations: &mut Vec<Violation>,
) -> Value {
    let Some((node, _)) = graph.deref(node) else { return value.clone() };
    if Placeholder::from_value(value).is_some() {
        return value.clone();
    }
    match (node, value) {
        (SchemaNode::Object { children, .. }, Value::Object(map)) => {
            let out: Map<String, Value> = map
                .iter()
                .map(|(key, child)| {
                    let normalized = match children.get(key) {
                        Some(schema) => {
                            normalize_walk(child, schema, graph, &child_path(path, key), Some(key), violations)
                        }
                        None => child.clone(),
                    };
                    (key.clone(), normalized)
                })
                .collect();
            Value::Object(out)
        }
        (SchemaNode::Array { item }, Value::Array(items)) => Value::Array(
            items
                .iter()
                .enumerate()
                .map(|(i, element)| normalize_walk(element, item, graph, &format!("{path}[{i}]"), field, violations))
                .collect(),
        ),
        (SchemaNode::String, Value::String(s)) if is_currency_field(field) => {
            Value::String(s.trim().to_ascii_uppercase())
        }
        (SchemaNode::Number | SchemaNode::Integer, Value::Number(n)) => Value::Number(canonical_number(n)),
        (SchemaNode::Number | SchemaNode::Integer, Value::String(s)) => match parse_decimal(s) {
            Some(n) => Value::Number(n),
            None => value.clone(),
        },
        (SchemaNode::Enum { values }, Value::String(s)) => {
            if values.contains(s) {
                return value.clone();
            }
            let key = enum_key(s);
            match values.iter().find(|v| enum_key(v) == key) {
                Some(canonical) => Value::String(canonical.clone()),
                None => {
                    violations.push(Violation {
                        path: path.to_string(),
                        rule: Rule::UnmappableEnum,
                        detail: format!("`{s}` does not match any of {}", values.join(", ")),
                    });
                    value.clone()
                }
            }
        }
        _ => value.clone(),
    }
}

fn enum_key(text: &str) -> String {
    text.trim()
        .chars()
        .map(|c| if c == '-' || c == ' ' { '_' } else { c.to_ascii_uppercase() })
        .collect()
}

/// Integers lose any fractional zeros; other values keep their shortest form.
pub fn canonical_number(n: &Number) -> Number {
    if n.is_i64() || n.is_u64() {
        return n.clone();
    }
    match n.as_f64() {
        Some(f) if f.fract() == 0.0 && f.abs() < 9_007_199_254_740_992.0 => Number::from(f as i64),
        Some(f) => Number::from_f64(f).unwrap_or_else(|| n.clone()),
        None => n.clone(),
    }
}

/// Parses plain decimal text such as `5,000,000.00`.
fn parse_decimal(text: &str) -> Option<Number> {
    let cleaned: String = text.trim().chars().filter(|c| *c != ',' && *c != '_').collect();
    let valid = !cleaned.is_empty()
        && cleaned.chars().enumerate().all(|(i, c)| c.is_ascii_digit() || c == '.' || (i == 0 && c == '-'))
        && cleaned.chars().filter(|c| *c == '.').count() <= 1
        && cleaned.chars().any(|c| c.is_ascii_digit());
    if !valid {
        return None;
    }
    let f: f64 = cleaned.parse().ok()?;
    Number::from_f64(f).map(|n| canonical_number(&n))
}
