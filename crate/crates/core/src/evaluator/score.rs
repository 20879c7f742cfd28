use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conformance::{normalize, Violation};
use crate::schema::SchemaGraph;

/// Leaf-level comparison of a generated document against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub score: f64,
    pub matched: usize,
    pub truth_leaves: usize,
    /// Truth leaves present in the output at the same path with another value.
    pub mismatched: Vec<String>,
    /// Truth leaves with no counterpart in the output.
    pub missing: Vec<String>,
    /// Output leaves with no counterpart in the truth. They earn no credit.
    pub extraneous: Vec<String>,
    /// Set when either side failed to normalize; the score is then 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Violation>,
}

/// Percentage of ground-truth leaves reproduced at the same path.
pub fn auto_score(generated: &Value, truth: &Value, graph: &SchemaGraph) -> f64 {
    score_breakdown(generated, truth, graph).score
}

/// [`auto_score`] with the matching details.
///
/// Both sides are normalized first. Array entries are paired by a maximum
/// weight assignment (weight = matched leaves), applied recursively, so entry
/// order never matters. Paths in the breakdown use truth indices for matched
/// entries and output indices for extraneous ones.
pub fn score_breakdown(generated: &Value, truth: &Value, graph: &SchemaGraph) -> ScoreBreakdown {
    let g = normalize(generated, graph);
    let t = normalize(truth, graph);
    let truth_leaves = count_leaves(&t.value);
    if !g.violations.is_empty() || !t.violations.is_empty() {
        let mut diagnostics = t.violations;
        diagnostics.extend(g.violations);
        return ScoreBreakdown {
            score: 0.0,
            matched: 0,
            truth_leaves,
            mismatched: Vec::new(),
            missing: Vec::new(),
            extraneous: Vec::new(),
            diagnostics,
        };
    }
    let mut diff = Diff::default();
    let matched = compare(Some(&g.value), &t.value, "", &mut diff);
    extraneous_leaves(&g.value, &t.value, "", &mut diff.extraneous);
    let score = if truth_leaves == 0 {
        // Nothing to reproduce: an empty answer is exact.
        if count_leaves(&g.value) == 0 { 100.0 } else { 0.0 }
    } else {
        100.0 * matched as f64 / truth_leaves as f64
    };
    ScoreBreakdown {
        score,
        matched,
        truth_leaves,
        mismatched: diff.mismatched,
        missing: diff.missing,
        extraneous: diff.extraneous,
        diagnostics: Vec::new(),
    }
}

pub fn count_leaves(value: &Value) -> usize {
    match value {
        Value::Object(map) => map.values().map(count_leaves).sum(),
        Value::Array(items) => items.iter().map(count_leaves).sum(),
        _ => 1,
    }
}

#[derive(Default)]
struct Diff {
    mismatched: Vec<String>,
    missing: Vec<String>,
    extraneous: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() { key.to_string() } else { format!("{path}/{key}") }
}

/// Number of truth leaves matched, without recording anything.
fn matched_count(generated: &Value, truth: &Value) -> usize {
    match (generated, truth) {
        (Value::Object(g), Value::Object(t)) => {
            t.iter().map(|(k, tv)| g.get(k).map_or(0, |gv| matched_count(gv, tv))).sum()
        }
        (Value::Array(g), Value::Array(t)) => assignment(g, t).iter().map(|&(_, _, w)| w).sum(),
        (Value::Object(_) | Value::Array(_), _) | (_, Value::Object(_) | Value::Array(_)) => 0,
        (g, t) => usize::from(g == t),
    }
}

/// Best pairing of truth entries to output entries as `(truth, output, weight)`.
fn assignment(generated: &[Value], truth: &[Value]) -> Vec<(usize, usize, usize)> {
    if generated.is_empty() || truth.is_empty() {
        return Vec::new();
    }
    let weights: Vec<Vec<usize>> =
        truth.iter().map(|t| generated.iter().map(|g| matched_count(g, t)).collect()).collect();
    // kuhn_munkres needs rows <= columns.
    let transpose = truth.len() > generated.len();
    let (rows, cols) = if transpose { (generated.len(), truth.len()) } else { (truth.len(), generated.len()) };
    let matrix = Matrix::from_fn(rows, cols, |(r, c)| {
        let w = if transpose { weights[c][r] } else { weights[r][c] };
        w as i64
    });
    let (_, pairs) = kuhn_munkres(&matrix);
    pairs
        .into_iter()
        .enumerate()
        .map(|(r, c)| if transpose { (c, r) } else { (r, c) })
        .map(|(t, g)| (t, g, weights[t][g]))
        .collect()
}

fn compare(generated: Option<&Value>, truth: &Value, path: &str, diff: &mut Diff) -> usize {
    match truth {
        Value::Object(t) => {
            let g = generated.and_then(Value::as_object);
            t.iter().map(|(k, tv)| compare(g.and_then(|g| g.get(k)), tv, &join(path, k), diff)).sum()
        }
        Value::Array(t) => {
            let g = generated.and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]);
            let pairs = assignment(g, t);
            let mut total = 0;
            for (i, tv) in t.iter().enumerate() {
                let partner = pairs.iter().find(|&&(ti, _, _)| ti == i).map(|&(_, gi, _)| &g[gi]);
                total += compare(partner, tv, &format!("{path}[{i}]"), diff);
            }
            total
        }
        leaf => match generated {
            Some(g) if g == leaf => 1,
            Some(g) if !g.is_object() && !g.is_array() => {
                diff.mismatched.push(path.to_string());
                0
            }
            _ => {
                missing_leaves(leaf, path, &mut diff.missing);
                0
            }
        },
    }
}

fn missing_leaves(value: &Value, path: &str, out: &mut Vec<String>) {
    match value {
        Value::Object(map) => map.iter().for_each(|(k, v)| missing_leaves(v, &join(path, k), out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| missing_leaves(v, &format!("{path}[{i}]"), out)),
        _ => out.push(path.to_string()),
    }
}

/// Output leaves whose path (after entry pairing) does not exist in the truth.
fn extraneous_leaves(generated: &Value, truth: &Value, path: &str, out: &mut Vec<String>) {
    match (generated, truth) {
        (Value::Object(g), Value::Object(t)) => {
            for (k, gv) in g {
                match t.get(k) {
                    Some(tv) => extraneous_leaves(gv, tv, &join(path, k), out),
                    None => missing_leaves(gv, &join(path, k), out),
                }
            }
        }
        (Value::Array(g), Value::Array(t)) => {
            let pairs = assignment(g, t);
            for (gi, gv) in g.iter().enumerate() {
                match pairs.iter().find(|&&(_, pg, _)| pg == gi) {
                    Some(&(ti, _, _)) => extraneous_leaves(gv, &t[ti], &format!("{path}[{ti}]"), out),
                    None => missing_leaves(gv, &format!("{path}[{gi}]"), out),
                }
            }
        }
        (Value::Object(_) | Value::Array(_), _) => missing_leaves(generated, path, out),
        // A scalar against a scalar is a match or a mismatch, never extraneous.
        (_, Value::Object(_) | Value::Array(_)) => out.push(path.to_string()),
        _ => {}
    }
}
