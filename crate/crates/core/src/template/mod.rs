//! Clause template generation.
//!
//! A template is the smallest JSON document that reaches every target field
//! of a clause from the schema root. It is built by walking the schema from
//! the root and keeping only
//!
//! * nodes on the ancestor chain of a target path,
//! * the target leaves themselves, and
//! * fields the schema marks as required inside a kept object (recursively).
//!
//! Arrays get exactly one exemplar element. Kept leaves become typed
//! placeholder strings (`<<FILL|number|amount>>`) for the model to fill.

mod registry;

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde_json::{Map, Value};

use crate::clause::ClauseKind;
use crate::schema::{FieldPath, NodeKind, ResolveError, SchemaGraph, SchemaNode, Segment};

pub use registry::{builtin_targets, TargetRegistry, TargetSet};

const SENTINEL_OPEN: &str = "<<FILL|";
const SENTINEL_CLOSE: &str = ">>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("target `{path}` does not resolve: {source}")]
    Unresolvable {
        path: FieldPath,
        #[source]
        source: ResolveError,
    },
    #[error("target `{path}` addresses a {kind} node, not a leaf")]
    NonLeafTarget { path: FieldPath, kind: NodeKind },
    #[error("clause `{0}` has no target paths")]
    EmptyTargets(ClauseKind),
    #[error("invalid target registry: {0}")]
    Registry(String),
}

/// A typed hole in a template skeleton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub kind: NodeKind,
    pub hint: String,
}

impl Placeholder {
    pub fn sentinel(&self) -> String {
        format!("{SENTINEL_OPEN}{}|{}{SENTINEL_CLOSE}", self.kind, self.hint)
    }

    /// Recognises a sentinel string. Only leaf kinds are accepted.
    pub fn parse(text: &str) -> Option<Self> {
        let body = text.strip_prefix(SENTINEL_OPEN)?.strip_suffix(SENTINEL_CLOSE)?;
        let (kind, hint) = body.split_once('|')?;
        let kind = NodeKind::parse(kind).filter(|k| k.is_leaf())?;
        Some(Self { kind, hint: hint.to_string() })
    }

    pub fn from_value(value: &Value) -> Option<Self> {
        value.as_str().and_then(Self::parse)
    }

    /// True for anything that looks like a sentinel, well-formed or not.
    pub fn looks_like_sentinel(text: &str) -> bool {
        text.contains(SENTINEL_OPEN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub clause: ClauseKind,
    pub skeleton: Value,
    pub placeholder_paths: Vec<FieldPath>,
}

impl Template {
    /// Canonical text form: 2-space indent, schema field order, trailing newline.
    pub fn render(&self) -> String {
        render(self)
    }
}

pub fn render(template: &Template) -> String {
    let mut text = serde_json::to_string_pretty(&template.skeleton).expect("JSON values always serialize");
    text.push('\n');
    text
}

#[derive(Default)]
struct TargetTrie {
    terminal: bool,
    children: IndexMap<Segment, TargetTrie>,
}

impl TargetTrie {
    fn insert(&mut self, path: &FieldPath) {
        let mut node = self;
        for segment in path.segments() {
            node = node.children.entry(segment.clone()).or_default();
        }
        node.terminal = true;
    }
}

struct Builder<'g> {
    graph: &'g SchemaGraph,
    placeholders: Vec<FieldPath>,
    /// Definitions with a finite instance satisfying every required field.
    satisfiable: BTreeSet<&'g str>,
}

/// Least fixed point: a definition is satisfiable when all of its required
/// fields are. Arrays always are, since they may be empty.
fn satisfiable_definitions(graph: &SchemaGraph) -> BTreeSet<&str> {
    fn node_ok(node: &SchemaNode, known: &BTreeSet<&str>) -> bool {
        match node {
            SchemaNode::Reference { target } => known.contains(target.as_str()),
            SchemaNode::Object { children, required } => {
                required.iter().all(|r| children.get(r).is_none_or(|c| node_ok(c, known)))
            }
            _ => true,
        }
    }
    let mut known = BTreeSet::new();
    loop {
        let before = known.len();
        for (name, node) in graph.definitions() {
            if !known.contains(name.as_str()) && node_ok(node, &known) {
                known.insert(name.as_str());
            }
        }
        if known.len() == before {
            return known;
        }
    }
}

/// Templates for every clause in `registry`.
pub fn generate_all(
    graph: &SchemaGraph,
    registry: &TargetRegistry,
) -> Result<BTreeMap<ClauseKind, Template>, TemplateError> {
    registry.iter().map(|targets| Ok((targets.clause, generate_template(graph, targets)?))).collect()
}

/// Generates the pruned skeleton for `targets`.
pub fn generate_template(graph: &SchemaGraph, targets: &TargetSet) -> Result<Template, TemplateError> {
    targets.check(graph)?;
    let mut trie = TargetTrie::default();
    for path in &targets.targets {
        trie.insert(path);
    }
    let mut builder = Builder { graph, placeholders: Vec::new(), satisfiable: satisfiable_definitions(graph) };
    let mut path = FieldPath::root();
    let mut stack = vec![graph.root_name()];
    let skeleton = builder.on_chain(graph.root(), &trie, &mut path, &mut stack);
    Ok(Template { clause: targets.clause, skeleton, placeholder_paths: builder.placeholders })
}

impl<'g> Builder<'g> {
    /// Emits a node that lies on (or terminates) some target path.
    fn on_chain(
        &mut self,
        node: &'g SchemaNode,
        trie: &TargetTrie,
        path: &mut FieldPath,
        stack: &mut Vec<&'g str>,
    ) -> Value {
        // Targets were checked to resolve, so dereferencing cannot fail here.
        let (node, trail) = self.graph.deref(node).expect("target chain resolves");
        let pushed = trail.len();
        stack.extend(trail);

        let value = match node {
            SchemaNode::Object { children, required } => {
                let mut out = Map::new();
                for (name, child) in children {
                    let segment = Segment::Field(name.clone());
                    path.push(segment.clone());
                    if let Some(sub) = trie.children.get(&segment) {
                        out.insert(name.clone(), self.on_chain(child, sub, path, stack));
                    } else if required.contains(name) {
                        // Required expansion tracks its own definitions: re-entering one
                        // from the target chain still has a finite minimal instance.
                        if let Some(filled) = self.required(child, path, &mut Vec::new()) {
                            out.insert(name.clone(), filled);
                        }
                    }
                    path.pop();
                }
                Value::Object(out)
            }
            SchemaNode::Array { item } => {
                let sub = trie.children.get(&Segment::Element).expect("array on a target chain");
                path.push(Segment::Element);
                let exemplar = self.on_chain(item, sub, path, stack);
                path.pop();
                Value::Array(vec![exemplar])
            }
            leaf => {
                debug_assert!(trie.terminal);
                self.placeholder(leaf.kind(), path)
            }
        };

        stack.truncate(stack.len() - pushed);
        value
    }

    /// Emits the minimal instance of a required field hanging off a kept
    /// object. Returns `None` when the field has no finite instance (its
    /// required fields form a cycle) or, below an array, when it would
    /// re-enter a definition being expanded; the array is then left empty.
    fn required(&mut self, node: &'g SchemaNode, path: &mut FieldPath, stack: &mut Vec<&'g str>) -> Option<Value> {
        let (node, trail) = self.graph.deref(node)?;
        if trail.iter().any(|def| stack.contains(def) || !self.satisfiable.contains(def)) {
            return None;
        }
        let pushed = trail.len();
        stack.extend(trail);

        let value = match node {
            SchemaNode::Object { children, required } => {
                let mut out = Map::new();
                for (name, child) in children.iter().filter(|(name, _)| required.contains(name)) {
                    path.push(Segment::Field(name.clone()));
                    if let Some(filled) = self.required(child, path, stack) {
                        out.insert(name.clone(), filled);
                    }
                    path.pop();
                }
                Value::Object(out)
            }
            SchemaNode::Array { item } => {
                path.push(Segment::Element);
                let exemplar = self.required(item, path, stack);
                path.pop();
                Value::Array(exemplar.into_iter().collect())
            }
            leaf => self.placeholder(leaf.kind(), path),
        };

        stack.truncate(stack.len() - pushed);
        Some(value)
    }

    fn placeholder(&mut self, kind: NodeKind, path: &FieldPath) -> Value {
        self.placeholders.push(path.clone());
        let hint = path.last_field().unwrap_or("value").to_string();
        Value::String(Placeholder { kind, hint }.sentinel())
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::fixtures;
    use crate::schema::parse_schema;

    fn targets(clause: ClauseKind, paths: &[&str]) -> TargetSet {
        TargetSet::new(clause, paths.iter().map(|p| p.parse().unwrap())).unwrap()
    }

    #[test]
    fn prunes_unrelated_sibling() {
        let graph = parse_schema(
            r#"{"root":"R","definitions":{"R":{"kind":"object","children":{
                "a":{"kind":"object","children":{"x":{"kind":"string"},"y":{"kind":"string"}}}}}}}"#,
        )
        .unwrap();
        let template = generate_template(&graph, &targets(ClauseKind::Mta, &["a/x"])).unwrap();
        assert_eq!(template.skeleton, json!({"a": {"x": "<<FILL|string|x>>"}}));
        assert_eq!(template.placeholder_paths, vec!["a/x".parse().unwrap()]);
    }

    #[test]
    fn keeps_required_sibling() {
        let graph = parse_schema(
            r#"{"root":"R","definitions":{"R":{"kind":"object","children":{
                "a":{"kind":"object","children":{"x":{"kind":"string"},"y":{"kind":"string"},"z":{"kind":"integer"}},
                     "required":["z"]}}}}}"#,
        )
        .unwrap();
        let template = generate_template(&graph, &targets(ClauseKind::Mta, &["a/x"])).unwrap();
        assert_eq!(template.skeleton, json!({"a": {"x": "<<FILL|string|x>>", "z": "<<FILL|integer|z>>"}}));
    }

    #[test]
    fn mta_template_matches_worked_example_shape() {
        let graph = fixtures::cdm_schema();
        let template = generate_template(&graph, &builtin_targets(ClauseKind::Mta)).unwrap();
        let expected = json!({
            "agreementTerms": {"agreement": {"creditSupportAgreementElections": {
                "minimumTransferAmount": [{"mtaType": {"fixedAmount": {
                    "amount": "<<FILL|number|amount>>",
                    "currency": "<<FILL|string|currency>>",
                    "party": "<<FILL|enum|party>>"
                }}}]
            }}}
        });
        assert_eq!(template.skeleton, expected);
    }

    #[test]
    fn rendering_is_stable_and_parses() {
        let graph = fixtures::cdm_schema();
        for clause in ClauseKind::ALL {
            let a = generate_template(&graph, &builtin_targets(clause)).unwrap();
            let b = generate_template(&graph, &builtin_targets(clause)).unwrap();
            assert_eq!(a, b);
            let text = a.render();
            assert_eq!(text, b.render());
            assert!(text.ends_with("}\n"));
            let parsed: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(parsed, a.skeleton);
        }
        let mta = generate_template(&graph, &builtin_targets(ClauseKind::Mta)).unwrap();
        assert!(mta.render().contains("\"<<FILL|number|amount>>\""));
        assert!(mta.render().contains("\n  \"agreementTerms\": {"));
    }

    #[test]
    fn rejects_bad_targets() {
        let graph = fixtures::cdm_schema();
        let err = generate_template(&graph, &targets(ClauseKind::Mta, &["agreementTerms/nope"])).unwrap_err();
        assert!(matches!(err, TemplateError::Unresolvable { .. }));
        let err = generate_template(&graph, &targets(ClauseKind::Mta, &["agreementTerms/agreement"])).unwrap_err();
        assert!(matches!(err, TemplateError::NonLeafTarget { kind: NodeKind::Object, .. }));
    }

    #[test]
    fn required_cycle_is_cut() {
        let graph = parse_schema(
            r#"{"root":"N","definitions":{"N":{"kind":"object","children":{
                "label":{"kind":"string"},"next":{"kind":"reference","ref":"N"}},"required":["next"]}}}"#,
        )
        .unwrap();
        let template = generate_template(&graph, &targets(ClauseKind::Mta, &["label"])).unwrap();
        assert_eq!(template.skeleton, json!({"label": "<<FILL|string|label>>"}));
    }

    #[test]
    fn required_reentry_from_target_chain_is_kept() {
        // A -> (optional) B -> (required) A: A has no required fields, so `{}` satisfies it.
        let graph = parse_schema(
            r#"{"root":"A","definitions":{
                "A":{"kind":"object","children":{"b":{"kind":"reference","ref":"B"}}},
                "B":{"kind":"object","children":{"a":{"kind":"reference","ref":"A"},"x":{"kind":"integer"}},
                     "required":["a"]}}}"#,
        )
        .unwrap();
        let template = generate_template(&graph, &targets(ClauseKind::Mta, &["b/x"])).unwrap();
        assert_eq!(template.skeleton, json!({"b": {"a": {}, "x": "<<FILL|integer|x>>"}}));
    }

    #[test]
    fn sentinel_round_trip() {
        let p = Placeholder { kind: NodeKind::Number, hint: "amount".into() };
        assert_eq!(p.sentinel(), "<<FILL|number|amount>>");
        assert_eq!(Placeholder::parse("<<FILL|number|amount>>"), Some(p));
        assert_eq!(Placeholder::parse("<<FILL|object|x>>"), None);
        assert_eq!(Placeholder::parse("USD"), None);
    }
}
