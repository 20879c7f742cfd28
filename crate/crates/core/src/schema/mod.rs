//! CDM-style schema model.
//!
//! A schema document is a flat set of named definitions plus a root name:
//!
//! ```json
//! {"root": "Doc", "definitions": {"Doc": {"kind": "object", "children": {...}}}}
//! ```
//!
//! Nodes are one of `object`, `array`, `string`, `number`, `integer`,
//! `boolean`, `enum` or `reference`. References name another definition and
//! are followed transparently by [`SchemaGraph::resolve`]. Reference cycles
//! are legal; the definitions taking part in one are computed at parse time.

mod path;

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use petgraph::graph::DiGraph;
use serde_json::{json, Map, Value};

pub use path::{FieldPath, PathParseError, Segment};

/// Default recursion guard for [`SchemaGraph::enumerate_leaf_paths`].
pub const DEFAULT_MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Object,
    Array,
    String,
    Number,
    Integer,
    Boolean,
    Enum,
    Reference,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::Array => "array",
            NodeKind::String => "string",
            NodeKind::Number => "number",
            NodeKind::Integer => "integer",
            NodeKind::Boolean => "boolean",
            NodeKind::Enum => "enum",
            NodeKind::Reference => "reference",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "object" => NodeKind::Object,
            "array" => NodeKind::Array,
            "string" => NodeKind::String,
            "number" => NodeKind::Number,
            "integer" => NodeKind::Integer,
            "boolean" => NodeKind::Boolean,
            "enum" => NodeKind::Enum,
            "reference" => NodeKind::Reference,
            _ => return None,
        })
    }

    /// Scalar and enum kinds are the leaves of a document.
    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            NodeKind::String | NodeKind::Number | NodeKind::Integer | NodeKind::Boolean | NodeKind::Enum
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemaNode {
    Object {
        children: IndexMap<String, SchemaNode>,
        required: Vec<String>,
    },
    Array {
        item: Box<SchemaNode>,
    },
    String,
    Number,
    Integer,
    Boolean,
    Enum {
        values: Vec<String>,
    },
    Reference {
        target: String,
    },
}

impl SchemaNode {
    pub fn kind(&self) -> NodeKind {
        match self {
            SchemaNode::Object { .. } => NodeKind::Object,
            SchemaNode::Array { .. } => NodeKind::Array,
            SchemaNode::String => NodeKind::String,
            SchemaNode::Number => NodeKind::Number,
            SchemaNode::Integer => NodeKind::Integer,
            SchemaNode::Boolean => NodeKind::Boolean,
            SchemaNode::Enum { .. } => NodeKind::Enum,
            SchemaNode::Reference { .. } => NodeKind::Reference,
        }
    }

    pub fn is_required(&self, field: &str) -> bool {
        match self {
            SchemaNode::Object { required, .. } => required.iter().any(|r| r == field),
            _ => false,
        }
    }

    /// Serializes the node back into the schema dialect.
    pub fn to_json(&self) -> Value {
        match self {
            SchemaNode::Object { children, required } => {
                let mut out = Map::new();
                out.insert("kind".into(), json!("object"));
                let kids: Map<String, Value> =
                    children.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
                out.insert("children".into(), Value::Object(kids));
                if !required.is_empty() {
                    out.insert("required".into(), json!(required));
                }
                Value::Object(out)
            }
            SchemaNode::Array { item } => json!({"kind": "array", "item": item.to_json()}),
            SchemaNode::Enum { values } => json!({"kind": "enum", "values": values}),
            SchemaNode::Reference { target } => json!({"kind": "reference", "ref": target}),
            scalar => json!({"kind": scalar.kind().as_str()}),
        }
    }

    fn collect_references<'a>(&'a self, at: &str, out: &mut Vec<(String, &'a str)>) {
        match self {
            SchemaNode::Object { children, .. } => {
                for (name, child) in children {
                    child.collect_references(&format!("{at}/children/{name}"), out);
                }
            }
            SchemaNode::Array { item } => item.collect_references(&format!("{at}/item"), out),
            SchemaNode::Reference { target } => out.push((at.to_string(), target)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema at `{path}`: {detail}")]
    Malformed { path: String, detail: String },
    #[error("unknown node kind `{kind}` at `{path}`")]
    UnknownKind { path: String, kind: String },
    #[error("dangling reference to `{target}` at `{path}`")]
    DanglingReference { path: String, target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("field path must not be empty")]
    EmptyPath,
    #[error("cannot resolve segment `{segment}` after `{prefix}`")]
    Unresolvable { prefix: FieldPath, segment: String },
}

/// A parsed and fully reference-checked schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaGraph {
    root: String,
    definitions: IndexMap<String, SchemaNode>,
    cycle_members: BTreeSet<String>,
}

/// Parses a schema document, checking every reference.
pub fn parse_schema(text: &str) -> Result<SchemaGraph, SchemaError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SchemaError::Malformed {
        path: String::new(),
        detail: e.to_string(),
    })?;
    SchemaGraph::from_json(&doc)
}

impl SchemaGraph {
    pub fn from_json(doc: &Value) -> Result<Self, SchemaError> {
        let top = doc.as_object().ok_or_else(|| malformed("", "expected a JSON object"))?;
        for key in top.keys() {
            if key != "root" && key != "definitions" {
                return Err(malformed(key, "unexpected top-level field"));
            }
        }
        let root = top
            .get("root")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("root", "expected a definition name"))?
            .to_string();
        let defs = top
            .get("definitions")
            .and_then(Value::as_object)
            .ok_or_else(|| malformed("definitions", "expected an object"))?;

        let mut definitions = IndexMap::with_capacity(defs.len());
        for (name, node) in defs {
            let node = parse_node(node, &format!("definitions/{name}"))?;
            definitions.insert(name.clone(), node);
        }
        if !definitions.contains_key(&root) {
            return Err(SchemaError::DanglingReference { path: "root".into(), target: root });
        }

        let mut refs = Vec::new();
        for (name, node) in &definitions {
            node.collect_references(&format!("definitions/{name}"), &mut refs);
        }
        if let Some((path, target)) = refs.iter().find(|(_, t)| !definitions.contains_key(*t)) {
            return Err(SchemaError::DanglingReference {
                path: path.clone(),
                target: target.to_string(),
            });
        }

        let cycle_members = find_cycle_members(&definitions);
        Ok(Self { root, definitions, cycle_members })
    }

    pub fn root_name(&self) -> &str {
        &self.root
    }

    pub fn root(&self) -> &SchemaNode {
        &self.definitions[&self.root]
    }

    pub fn definitions(&self) -> &IndexMap<String, SchemaNode> {
        &self.definitions
    }

    pub fn definition(&self, name: &str) -> Option<&SchemaNode> {
        self.definitions.get(name)
    }

    pub fn is_cycle_member(&self, name: &str) -> bool {
        self.cycle_members.contains(name)
    }

    pub fn cycle_members(&self) -> impl Iterator<Item = &str> {
        self.cycle_members.iter().map(String::as_str)
    }

    pub fn to_json(&self) -> Value {
        let defs: Map<String, Value> =
            self.definitions.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        json!({"root": self.root, "definitions": defs})
    }

    /// Follows reference nodes until a structural node is reached.
    ///
    /// Returns the node and the definitions passed through, or `None` for a
    /// chain of references that loops without reaching structure.
    pub fn deref<'a>(&'a self, node: &'a SchemaNode) -> Option<(&'a SchemaNode, Vec<&'a str>)> {
        let mut current = node;
        let mut trail: Vec<&str> = Vec::new();
        while let SchemaNode::Reference { target } = current {
            if trail.contains(&target.as_str()) {
                return None;
            }
            trail.push(target);
            current = self.definitions.get(target)?;
        }
        Some((current, trail))
    }

    /// Returns the (dereferenced) node addressed by `path`.
    pub fn resolve(&self, path: &FieldPath) -> Result<&SchemaNode, ResolveError> {
        if path.is_empty() {
            return Err(ResolveError::EmptyPath);
        }
        let mut node = self.root();
        let mut prefix = FieldPath::root();
        for segment in path.segments() {
            let unresolvable = |prefix: &FieldPath| ResolveError::Unresolvable {
                prefix: prefix.clone(),
                segment: match segment {
                    Segment::Field(name) => name.clone(),
                    Segment::Element => "[]".into(),
                },
            };
            let (current, _) = self.deref(node).ok_or_else(|| unresolvable(&prefix))?;
            node = match (current, segment) {
                (SchemaNode::Object { children, .. }, Segment::Field(name)) => {
                    children.get(name).ok_or_else(|| unresolvable(&prefix))?
                }
                (SchemaNode::Array { item }, Segment::Element) => item,
                _ => return Err(unresolvable(&prefix)),
            };
            prefix.push(segment.clone());
        }
        self.deref(node).map(|(n, _)| n).ok_or_else(|| ResolveError::Unresolvable {
            prefix: path.parent().unwrap_or_default(),
            segment: "<reference loop>".into(),
        })
    }

    /// Lists every root-to-leaf path in document order, depth first.
    ///
    /// Recursion stops where a definition would appear twice on the current
    /// path, and no path longer than `max_depth` segments is produced.
    pub fn enumerate_leaf_paths(&self, max_depth: usize) -> Vec<FieldPath> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.as_str()];
        let mut path = FieldPath::root();
        self.walk_leaves(self.root(), &mut path, &mut stack, max_depth, &mut out);
        out
    }

    fn walk_leaves<'a>(
        &'a self,
        node: &'a SchemaNode,
        path: &mut FieldPath,
        stack: &mut Vec<&'a str>,
        max_depth: usize,
        out: &mut Vec<FieldPath>,
    ) {
        let Some((node, trail)) = self.deref(node) else { return };
        if trail.iter().any(|def| stack.contains(def)) {
            return;
        }
        let pushed = trail.len();
        stack.extend(trail);

        match node {
            SchemaNode::Object { children, .. } if path.len() < max_depth => {
                for (name, child) in children {
                    path.push(Segment::Field(name.clone()));
                    self.walk_leaves(child, path, stack, max_depth, out);
                    path.pop();
                }
            }
            SchemaNode::Array { item } if path.len() < max_depth => {
                path.push(Segment::Element);
                self.walk_leaves(item, path, stack, max_depth, out);
                path.pop();
            }
            leaf if leaf.kind().is_leaf() && !path.is_empty() => out.push(path.clone()),
            _ => {}
        }

        stack.truncate(stack.len() - pushed);
    }
}

fn malformed(path: &str, detail: &str) -> SchemaError {
    SchemaError::Malformed { path: path.to_string(), detail: detail.to_string() }
}

fn parse_node(value: &Value, at: &str) -> Result<SchemaNode, SchemaError> {
    let obj = value.as_object().ok_or_else(|| malformed(at, "node must be an object"))?;
    let kind_name = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(at, "missing `kind`"))?;
    let kind = NodeKind::parse(kind_name)
        .ok_or_else(|| SchemaError::UnknownKind { path: at.to_string(), kind: kind_name.to_string() })?;

    let allowed: &[&str] = match kind {
        NodeKind::Object => &["kind", "children", "required"],
        NodeKind::Array => &["kind", "item"],
        NodeKind::Enum => &["kind", "values"],
        NodeKind::Reference => &["kind", "ref"],
        _ => &["kind"],
    };
    if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(malformed(at, &format!("field `{extra}` is not valid for kind `{kind}`")));
    }

    Ok(match kind {
        NodeKind::Object => {
            let mut children = IndexMap::new();
            if let Some(kids) = obj.get("children") {
                let kids = kids
                    .as_object()
                    .ok_or_else(|| malformed(&format!("{at}/children"), "expected an object"))?;
                for (name, child) in kids {
                    children.insert(name.clone(), parse_node(child, &format!("{at}/children/{name}"))?);
                }
            }
            let mut required = Vec::new();
            if let Some(req) = obj.get("required") {
                let req = req
                    .as_array()
                    .ok_or_else(|| malformed(&format!("{at}/required"), "expected an array"))?;
                for name in req {
                    let name = name
                        .as_str()
                        .ok_or_else(|| malformed(&format!("{at}/required"), "expected field names"))?;
                    if !children.contains_key(name) {
                        return Err(malformed(
                            &format!("{at}/required"),
                            &format!("required field `{name}` is not a child"),
                        ));
                    }
                    if !required.iter().any(|r| r == name) {
                        required.push(name.to_string());
                    }
                }
            }
            SchemaNode::Object { children, required }
        }
        NodeKind::Array => {
            let item = obj.get("item").ok_or_else(|| malformed(at, "array requires `item`"))?;
            SchemaNode::Array { item: Box::new(parse_node(item, &format!("{at}/item"))?) }
        }
        NodeKind::Enum => {
            let values = obj
                .get("values")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed(at, "enum requires `values`"))?;
            let values = values
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| malformed(&format!("{at}/values"), "enum values must be strings"))?;
            if values.is_empty() {
                return Err(malformed(&format!("{at}/values"), "enum values must not be empty"));
            }
            SchemaNode::Enum { values }
        }
        NodeKind::Reference => {
            let target = obj
                .get("ref")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed(at, "reference requires `ref`"))?;
            SchemaNode::Reference { target: target.to_string() }
        }
        NodeKind::String => SchemaNode::String,
        NodeKind::Number => SchemaNode::Number,
        NodeKind::Integer => SchemaNode::Integer,
        NodeKind::Boolean => SchemaNode::Boolean,
    })
}

fn find_cycle_members(definitions: &IndexMap<String, SchemaNode>) -> BTreeSet<String> {
    let mut graph = DiGraph::<&str, ()>::new();
    let ids: IndexMap<&str, _> =
        definitions.keys().map(|name| (name.as_str(), graph.add_node(name.as_str()))).collect();
    for (name, node) in definitions {
        let mut refs = Vec::new();
        node.collect_references("", &mut refs);
        for (_, target) in refs {
            graph.update_edge(ids[name.as_str()], ids[target], ());
        }
    }
    let mut members = BTreeSet::new();
    for component in petgraph::algo::tarjan_scc(&graph) {
        let cyclic = component.len() > 1
            || component.iter().any(|&n| graph.find_edge(n, n).is_some());
        if cyclic {
            members.extend(component.iter().map(|&n| graph[n].to_string()));
        }
    }
    members
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn path(text: &str) -> FieldPath {
        text.parse().unwrap()
    }

    #[test]
    fn minimal_schema() {
        let graph = parse_schema(r#"{"root":"A","definitions":{"A":{"kind":"string"}}}"#).unwrap();
        assert_eq!(graph.definitions().len(), 1);
        assert_eq!(graph.root(), &SchemaNode::String);
        assert!(graph.enumerate_leaf_paths(DEFAULT_MAX_DEPTH).is_empty());
    }

    #[test]
    fn two_definition_cycle_is_flagged() {
        let graph = parse_schema(
            r#"{"root":"A","definitions":{
                "A":{"kind":"reference","ref":"B"},
                "B":{"kind":"reference","ref":"A"}}}"#,
        )
        .unwrap();
        assert!(graph.is_cycle_member("A"));
        assert!(graph.is_cycle_member("B"));
        assert!(graph.enumerate_leaf_paths(8).is_empty());
    }

    #[test]
    fn dangling_reference_names_target() {
        let err = parse_schema(
            r#"{"root":"A","definitions":{"A":{"kind":"object","children":{"x":{"kind":"reference","ref":"Missing"}}}}}"#,
        )
        .unwrap_err();
        match err {
            SchemaError::DanglingReference { path, target } => {
                assert_eq!(target, "Missing");
                assert_eq!(path, "definitions/A/children/x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_kind_and_malformed_documents() {
        let err = parse_schema(r#"{"root":"A","definitions":{"A":{"kind":"tuple"}}}"#).unwrap_err();
        assert!(matches!(err, SchemaError::UnknownKind { ref kind, .. } if kind == "tuple"));
        assert!(matches!(parse_schema("{"), Err(SchemaError::Malformed { .. })));
        let err = parse_schema(
            r#"{"root":"A","definitions":{"A":{"kind":"object","children":{},"required":["z"]}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::Malformed { ref path, .. } if path == "definitions/A/required"));
        let err = parse_schema(r#"{"root":"A","definitions":{"A":{"kind":"enum","values":[]}}}"#).unwrap_err();
        assert!(matches!(err, SchemaError::Malformed { .. }));
        let err = parse_schema(r#"{"root":"A","definitions":{"A":{"kind":"string","item":{"kind":"string"}}}}"#)
            .unwrap_err();
        assert!(matches!(err, SchemaError::Malformed { .. }));
    }

    #[test]
    fn resolve_mta_array() {
        let graph = fixtures::cdm_schema();
        let node = graph
            .resolve(&path("agreementTerms/agreement/creditSupportAgreementElections/minimumTransferAmount"))
            .unwrap();
        let SchemaNode::Array { item } = node else { panic!("expected array, got {node:?}") };
        assert_eq!(item.as_ref(), &SchemaNode::Reference { target: "MinimumTransferAmount".into() });
    }

    #[test]
    fn resolve_errors() {
        let graph = fixtures::cdm_schema();
        assert_eq!(graph.resolve(&FieldPath::root()), Err(ResolveError::EmptyPath));
        let err = graph
            .resolve(&path("agreementTerms/agreement/masterAgreementElections/agreementDate/year"))
            .unwrap_err();
        assert_eq!(
            err,
            ResolveError::Unresolvable {
                prefix: path("agreementTerms/agreement/masterAgreementElections/agreementDate"),
                segment: "year".into(),
            }
        );
    }

    #[test]
    fn enumerate_simple_object() {
        let graph = parse_schema(
            r#"{"root":"A","definitions":{"A":{"kind":"object","children":{"x":{"kind":"string"},"y":{"kind":"number"}}}}}"#,
        )
        .unwrap();
        assert_eq!(graph.enumerate_leaf_paths(4), vec![path("x"), path("y")]);
    }

    #[test]
    fn self_reference_terminates() {
        let graph = parse_schema(
            r#"{"root":"A","definitions":{"A":{"kind":"object","children":{
                "name":{"kind":"string"},
                "next":{"kind":"reference","ref":"A"},
                "wrap":{"kind":"object","children":{"deep":{"kind":"object","children":{"deeper":{"kind":"object","children":{"leaf":{"kind":"string"}}}}}}}}}}}"#,
        )
        .unwrap();
        assert!(graph.is_cycle_member("A"));
        let paths = graph.enumerate_leaf_paths(3);
        assert_eq!(paths, vec![path("name")]);
        assert!(paths.iter().all(|p| p.len() <= 3));
        assert_eq!(graph.enumerate_leaf_paths(4), vec![path("name"), path("wrap/deep/deeper/leaf")]);
    }

    #[test]
    fn fixture_cycle_members() {
        let graph = fixtures::cdm_schema();
        let members: Vec<_> = graph.cycle_members().collect();
        assert_eq!(members, vec!["CreditSupportDocument"]);
    }

    #[test]
    fn round_trips_through_dialect() {
        let graph = fixtures::cdm_schema();
        let again = SchemaGraph::from_json(&graph.to_json()).unwrap();
        assert_eq!(graph, again);
    }
}
