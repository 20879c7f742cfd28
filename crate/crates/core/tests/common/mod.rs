//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::HashMap;

use cdmizer_core::conformance::normalize;
use cdmizer_core::schema::{FieldPath, NodeKind, SchemaGraph, SchemaNode};
use cdmizer_core::template::{Placeholder, Template};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

const WORDS: &[&str] = &["alpha", "bravo", "charlie", "delta", "echo", "usd", "eur", "party", "amount", "gbp"];

fn leaf_value(kind: NodeKind, node: &SchemaNode, rng: &mut ChaCha8Rng) -> Value {
    match (kind, node) {
        (_, SchemaNode::Enum { values }) => json!(values.choose(rng).unwrap()),
        (NodeKind::Integer, _) => json!(rng.gen_range(-1_000_000i64..1_000_000)),
        (NodeKind::Number, _) => {
            if rng.gen_bool(0.5) {
                json!(rng.gen_range(0u64..100_000_000))
            } else {
                json!(rng.gen_range(0i64..1_000_000) as f64 / 100.0)
            }
        }
        (NodeKind::Boolean, _) => json!(rng.gen_bool(0.5)),
        _ => json!(WORDS.choose(rng).unwrap()),
    }
}

/// Replaces every placeholder with a random value of the right kind and
/// repeats each array exemplar one to three times.
pub fn fill(template: &Template, graph: &SchemaGraph, rng: &mut ChaCha8Rng) -> Value {
    fn walk(value: &Value, path: &mut FieldPath, graph: &SchemaGraph, rng: &mut ChaCha8Rng) -> Value {
        match value {
            Value::Object(map) => {
                let mut out = Map::new();
                for (k, v) in map {
                    path.push(cdmizer_core::schema::Segment::Field(k.clone()));
                    out.insert(k.clone(), walk(v, path, graph, rng));
                    path.pop();
                }
                Value::Object(out)
            }
            Value::Array(items) => {
                path.push(cdmizer_core::schema::Segment::Element);
                let copies = rng.gen_range(1..=3);
                let out = (0..copies).flat_map(|_| items.iter().map(|i| walk(i, path, graph, rng)).collect::<Vec<_>>());
                let out = Value::Array(out.collect());
                path.pop();
                out
            }
            Value::String(s) => match Placeholder::parse(s) {
                Some(p) => {
                    let node = graph.resolve(path).expect("placeholder paths resolve");
                    leaf_value(p.kind, node, rng)
                }
                None => value.clone(),
            },
            other => other.clone(),
        }
    }
    walk(&template.skeleton, &mut FieldPath::root(), graph, rng)
}

/// A random schema in the bundled dialect. Required references only point to
/// later definitions, so every schema has a finite instance.
pub fn random_schema(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=5);
    let mut defs = Map::new();
    for i in 0..n {
        let mut children = Map::new();
        let mut required = Vec::new();
        for f in 0..rng.gen_range(1..=4) {
            let name = format!("f{f}");
            let later = (i + 1 < n).then(|| format!("D{}", rng.gen_range(i + 1..n)));
            let any = format!("D{}", rng.gen_range(0..n));
            let (node, may_require) = match rng.gen_range(0..9) {
                0 => (json!({"kind": "string"}), true),
                1 => (json!({"kind": "number"}), true),
                2 => (json!({"kind": "integer"}), true),
                3 => (json!({"kind": "boolean"}), true),
                4 => (json!({"kind": "enum", "values": ["RED", "GREEN_LIGHT", "BLUE"]}), true),
                5 => (json!({"kind": "array", "item": {"kind": "number"}}), true),
                6 => match later {
                    Some(t) => (json!({"kind": "array", "item": {"kind": "reference", "ref": t}}), true),
                    None => (json!({"kind": "array", "item": {"kind": "reference", "ref": any}}), false),
                },
                7 => match later {
                    Some(t) => (json!({"kind": "reference", "ref": t}), true),
                    None => (json!({"kind": "string"}), true),
                },
                _ => (json!({"kind": "reference", "ref": any}), false),
            };
            if may_require && rng.gen_bool(0.5) {
                required.push(name.clone());
            }
            children.insert(name, node);
        }
        defs.insert(format!("D{i}"), json!({"kind": "object", "children": children, "required": required}));
    }
    serde_json::to_string_pretty(&json!({"root": "D0", "definitions": defs})).unwrap()
}

/// Exhaustive leaf matching: every injective pairing of array entries is tried.
pub fn oracle_matched(generated: &Value, truth: &Value) -> usize {
    match truth {
        Value::Object(t) => match generated {
            Value::Object(g) => t.iter().map(|(k, tv)| g.get(k).map_or(0, |gv| oracle_matched(gv, tv))).sum(),
            _ => 0,
        },
        Value::Array(t) => match generated {
            Value::Array(g) => best_pairing(g, t, 0, &mut vec![false; g.len()]),
            _ => 0,
        },
        leaf => usize::from(!generated.is_object() && !generated.is_array() && generated == leaf),
    }
}

fn best_pairing(g: &[Value], t: &[Value], i: usize, used: &mut Vec<bool>) -> usize {
    if i == t.len() {
        return 0;
    }
    let mut best = best_pairing(g, t, i + 1, used);
    for j in 0..g.len() {
        if !used[j] {
            used[j] = true;
            best = best.max(oracle_matched(&g[j], &t[i]) + best_pairing(g, t, i + 1, used));
            used[j] = false;
        }
    }
    best
}

pub fn oracle_leaves(value: &Value) -> usize {
    let mut stack = vec![value];
    let mut count = 0;
    while let Some(v) = stack.pop() {
        match v {
            Value::Object(m) => stack.extend(m.values()),
            Value::Array(a) => stack.extend(a.iter()),
            _ => count += 1,
        }
    }
    count
}

/// Reference score: 0 when either side cannot be normalized, else the
/// percentage of truth leaves matched by the exhaustive pairing.
pub fn oracle_score(generated: &Value, truth: &Value, graph: &SchemaGraph) -> f64 {
    let g = normalize(generated, graph);
    let t = normalize(truth, graph);
    if !g.violations.is_empty() || !t.violations.is_empty() {
        return 0.0;
    }
    let total = oracle_leaves(&t.value);
    if total == 0 {
        return if oracle_leaves(&g.value) == 0 { 100.0 } else { 0.0 };
    }
    100.0 * oracle_matched(&g.value, &t.value) as f64 / total as f64
}

/// JSON pointers of every scalar and every array in `value`.
pub fn pointers(value: &Value) -> (Vec<String>, Vec<String>) {
    fn walk(v: &Value, at: String, leaves: &mut Vec<String>, arrays: &mut Vec<String>) {
        match v {
            Value::Object(m) => m.iter().for_each(|(k, c)| walk(c, format!("{at}/{k}"), leaves, arrays)),
            Value::Array(a) => {
                arrays.push(at.clone());
                a.iter().enumerate().for_each(|(i, c)| walk(c, format!("{at}/{i}"), leaves, arrays));
            }
            _ => leaves.push(at),
        }
    }
    let (mut leaves, mut arrays) = (Vec::new(), Vec::new());
    walk(value, String::new(), &mut leaves, &mut arrays);
    (leaves, arrays)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    EditLeaf,
    DeleteEntry,
    Permute,
    DuplicateEntry,
}

/// Applies `ops` to a copy of `truth`.
pub fn mutate(truth: &Value, ops: &[Mutation], rng: &mut ChaCha8Rng) -> Value {
    let mut v = truth.clone();
    for op in ops {
        let (leaves, arrays) = pointers(&v);
        match op {
            Mutation::EditLeaf => {
                let Some(p) = leaves.choose(rng) else { continue };
                let slot = v.pointer_mut(p).unwrap();
                *slot = match slot.take() {
                    Value::Number(n) => json!(n.as_f64().unwrap() + 1.0),
                    Value::String(s) => json!(format!("{s}x")),
                    Value::Bool(b) => json!(!b),
                    other => other,
                };
            }
            Mutation::DeleteEntry => {
                let Some(p) = arrays.choose(rng) else { continue };
                let arr = v.pointer_mut(p).unwrap().as_array_mut().unwrap();
                if !arr.is_empty() {
                    let i = rng.gen_range(0..arr.len());
                    arr.remove(i);
                }
            }
            Mutation::Permute => {
                let Some(p) = arrays.choose(rng) else { continue };
                v.pointer_mut(p).unwrap().as_array_mut().unwrap().shuffle(rng);
            }
            Mutation::DuplicateEntry => {
                let Some(p) = arrays.choose(rng) else { continue };
                let arr = v.pointer_mut(p).unwrap().as_array_mut().unwrap();
                if let Some(first) = arr.first().cloned() {
                    arr.push(first);
                }
            }
        }
    }
    v
}

/// Independent TF-IDF cosine: raw counts, smoothed idf, no shared code with the index.
pub fn oracle_cosine(texts: &[&str], a: usize, b: usize) -> f64 {
    let tokens: Vec<Vec<String>> = texts
        .iter()
        .map(|t| {
            t.to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| w.chars().count() > 1)
                .map(String::from)
                .collect()
        })
        .collect();
    let n = texts.len() as f64;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for doc in &tokens {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort();
        seen.dedup();
        for w in seen {
            *df.entry(w).or_default() += 1.0;
        }
    }
    let vector = |doc: &'_ [String]| -> HashMap<String, f64> {
        let mut v: HashMap<String, f64> = HashMap::new();
        for w in doc {
            *v.entry(w.clone()).or_default() += 1.0;
        }
        for (w, x) in v.iter_mut() {
            *x *= ((1.0 + n) / (1.0 + df[w.as_str()])).ln() + 1.0;
        }
        v
    };
    let (va, vb) = (vector(&tokens[a]), vector(&tokens[b]));
    let dot: f64 = va.iter().map(|(w, x)| x * vb.get(w).copied().unwrap_or(0.0)).sum();
    let na = va.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}
