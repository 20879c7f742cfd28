//! Example retrieval for prompt augmentation.
//!
//! Whole contracts are indexed as TF-IDF vectors (smoothed idf, L2
//! normalized) and compared by cosine similarity. A query never retrieves
//! itself, and only documents with ground truth for the requested clause are
//! eligible.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::clause::ClauseKind;
use crate::corpus::{clause_excerpt, Corpus};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("query document `{0}` is not indexed")]
    UnknownQuery(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub doc_id: String,
    pub similarity: f64,
    pub clause_truth: Value,
    pub excerpt: String,
}

/// Source of contextual examples for a query document.
pub trait ExampleRetriever: Send + Sync {
    fn retrieve(&self, query_id: &str, clause: ClauseKind, k: usize) -> Result<Vec<RetrievedExample>, RetrievalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Lexical,
    External,
}

/// Lowercases, splits on non-alphanumerics and drops one-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum DocVector {
    /// (term id, weight) sorted by term id.
    Sparse(Vec<(usize, f64)>),
    Dense(Vec<f64>),
}

impl DocVector {
    fn dot(&self, other: &DocVector) -> f64 {
        match (self, other) {
            (DocVector::Sparse(a), DocVector::Sparse(b)) => {
                let (mut i, mut j, mut sum) = (0, 0, 0.0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            sum += a[i].1 * b[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                sum
            }
            (DocVector::Dense(a), DocVector::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => 0.0,
        }
    }

    fn normalize(&mut self) {
        let weights: Box<dyn Iterator<Item = &mut f64>> = match self {
            DocVector::Sparse(v) => Box::new(v.iter_mut().map(|(_, w)| w)),
            DocVector::Dense(v) => Box::new(v.iter_mut()),
        };
        let weights: Vec<&mut f64> = weights.collect();
        let norm = weights.iter().map(|w| **w * **w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in weights {
                *w /= norm;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct IndexedDoc {
    id: String,
    vector: DocVector,
    text: String,
    truth: BTreeMap<ClauseKind, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    vocabulary: BTreeMap<String, usize>,
    docs: Vec<IndexedDoc>,
    by_id: HashMap<String, usize>,
}

/// Builds the lexical TF-IDF index.
pub fn build_index(corpus: &Corpus) -> Result<RetrievalIndex, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let tokenized: Vec<Vec<String>> = corpus.docs().iter().map(|d| tokenize(&d.text)).collect();

    let mut vocabulary = BTreeMap::new();
    for tokens in &tokenized {
        for token in tokens {
            vocabulary.entry(token.clone()).or_insert(0);
        }
    }
    for (i, id) in vocabulary.values_mut().enumerate() {
        *id = i;
    }

    let mut doc_freq = vec![0usize; vocabulary.len()];
    let mut counts_per_doc = Vec::with_capacity(tokenized.len());
    for tokens in &tokenized {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokens {
            *counts.entry(vocabulary[token]).or_default() += 1;
        }
        for term in counts.keys() {
            doc_freq[*term] += 1;
        }
        counts_per_doc.push(counts);
    }

    let n = corpus.len() as f64;
    let idf: Vec<f64> = doc_freq.iter().map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0).collect();

    let vectors = counts_per_doc.into_iter().map(|counts| {
        let mut v = DocVector::Sparse(counts.into_iter().map(|(t, c)| (t, c as f64 * idf[t])).collect());
        v.normalize();
        v
    });
    Ok(RetrievalIndex::assemble(corpus, vectors.collect(), vocabulary))
}

/// Builds an index from an OpenAI-style embeddings endpoint
/// (`POST {"model", "input": [...]}` → `{"data": [{"embedding": [...]}]}`).
pub fn build_external_index(
    corpus: &Corpus,
    endpoint: &str,
    model: Option<&str>,
    timeout: Duration,
) -> Result<RetrievalIndex, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let provider = |e: &dyn std::fmt::Display| RetrievalError::Provider(e.to_string());
    let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| provider(&e))?;
    let inputs: Vec<&str> = corpus.docs().iter().map(|d| d.text.as_str()).collect();
    let response = client
        .post(endpoint)
        .json(&json!({"model": model.unwrap_or("default"), "input": inputs}))
        .send()
        .map_err(|e| provider(&e))?;
    if !response.status().is_success() {
        return Err(RetrievalError::Provider(format!("HTTP {}", response.status())));
    }
    let body: Value = response.json().map_err(|e| provider(&e))?;
    let data = body["data"].as_array().ok_or_else(|| RetrievalError::Provider("missing `data`".into()))?;
    if data.len() != corpus.len() {
        return Err(RetrievalError::Provider(format!("expected {} embeddings, got {}", corpus.len(), data.len())));
    }
    let vectors = data
        .iter()
        .map(|item| {
            let values = item["embedding"]
                .as_array()
                .and_then(|v| v.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                .ok_or_else(|| RetrievalError::Provider("embedding is not a number array".into()))?;
            let mut v = DocVector::Dense(values);
            v.normalize();
            Ok(v)
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    Ok(RetrievalIndex::assemble(corpus, vectors, BTreeMap::new()))
}

impl RetrievalIndex {
    fn assemble(corpus: &Corpus, vectors: Vec<DocVector>, vocabulary: BTreeMap<String, usize>) -> Self {
        let docs: Vec<IndexedDoc> = corpus
            .docs()
            .iter()
            .zip(vectors)
            .map(|(doc, vector)| IndexedDoc {
                id: doc.id.clone(),
                vector,
                text: doc.text.clone(),
                truth: doc.ground_truth.clone(),
            })
            .collect();
        let by_id = docs.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Self { vocabulary, docs, by_id }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }

    /// Cosine similarity in [0, 1].
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, RetrievalError> {
        let (a, b) = (self.position(a)?, self.position(b)?);
        Ok(self.docs[a].vector.dot(&self.docs[b].vector).clamp(0.0, 1.0))
    }

    fn position(&self, id: &str) -> Result<usize, RetrievalError> {
        self.by_id.get(id).copied().ok_or_else(|| RetrievalError::UnknownQuery(id.to_string()))
    }

    /// Documents a query may draw examples from: everything else with truth for `clause`.
    pub fn eligible_pool(&self, query_id: &str, clause: ClauseKind) -> Result<Vec<&str>, RetrievalError> {
        let query = self.position(query_id)?;
        Ok(self
            .docs
            .iter()
            .enumerate()
            .filter(|(i, d)| *i != query && d.truth.contains_key(&clause))
            .map(|(_, d)| d.id.as_str())
            .collect())
    }
}

impl ExampleRetriever for RetrievalIndex {
    fn retrieve(&self, query_id: &str, clause: ClauseKind, k: usize) -> Result<Vec<RetrievedExample>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let query = self.position(query_id)?;
        let query_vec = &self.docs[query].vector;
        let mut scored: Vec<(f64, &IndexedDoc)> = self
            .docs
            .iter()
            .enumerate()
            .filter(|(i, d)| *i != query && d.truth.contains_key(&clause))
            .map(|(_, d)| (query_vec.dot(&d.vector).clamp(0.0, 1.0), d))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(similarity, doc)| RetrievedExample {
                doc_id: doc.id.clone(),
                similarity,
                clause_truth: doc.truth[&clause].clone(),
                excerpt: clause_excerpt(&doc.text, clause),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContractDoc, Manifest};
    use serde_json::json;

    fn corpus(docs: &[(&str, &str, bool)]) -> Corpus {
        let docs = docs
            .iter()
            .map(|(id, text, has_truth)| {
                let mut truth = BTreeMap::new();
                if *has_truth {
                    truth.insert(ClauseKind::Mta, json!({"id": id}));
                }
                ContractDoc { id: id.to_string(), text: text.to_string(), ground_truth: truth }
            })
            .collect();
        Corpus::new(Manifest { name: "t".into(), source: String::new(), docs: vec![] }, docs).unwrap()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The U.S. Dollar, a 5,000-unit MTA!"), vec!["the", "dollar", "000", "unit", "mta"]);
    }

    #[test]
    fn identical_documents_have_similarity_one() {
        let index = build_index(&corpus(&[("a", "minimum transfer amount", true), ("b", "minimum transfer amount", true)]))
            .unwrap();
        assert_eq!(index.docs[0].vector, index.docs[1].vector);
        assert!((index.similarity("a", "b").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_documents_have_similarity_zero() {
        let index = build_index(&corpus(&[("a", "threshold rounding", true), ("b", "currency eligible", true)])).unwrap();
        assert_eq!(index.similarity("a", "b").unwrap(), 0.0);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_index(&corpus(&[])), Err(RetrievalError::EmptyCorpus)));
    }

    #[test]
    fn retrieve_excludes_query_and_sorts() {
        let index = build_index(&corpus(&[
            ("a", "alpha beta gamma", true),
            ("b", "alpha beta gamma", true),
            ("c", "alpha beta delta", true),
            ("d", "zeta eta theta", true),
            ("e", "alpha beta gamma", false),
        ]))
        .unwrap();
        let hits = index.retrieve("a", ClauseKind::Mta, 10).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["b", "c", "d"]);
        assert!(hits.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        assert_eq!(hits[0].clause_truth, json!({"id": "b"}));
        assert_eq!(index.retrieve("a", ClauseKind::Mta, 1).unwrap().len(), 1);
    }

    #[test]
    fn ties_break_on_id() {
        let index = build_index(&corpus(&[
            ("q", "alpha", true),
            ("z", "alpha", true),
            ("m", "alpha", true),
        ]))
        .unwrap();
        let ids: Vec<_> = index.retrieve("q", ClauseKind::Mta, 3).unwrap().into_iter().map(|h| h.doc_id).collect();
        assert_eq!(ids, vec!["m", "z"]);
    }

    #[test]
    fn retrieve_errors() {
        let index = build_index(&corpus(&[("a", "alpha", true)])).unwrap();
        assert!(matches!(index.retrieve("x", ClauseKind::Mta, 3), Err(RetrievalError::UnknownQuery(_))));
        assert!(matches!(index.retrieve("a", ClauseKind::Mta, 0), Err(RetrievalError::ZeroK)));
        assert!(index.retrieve("a", ClauseKind::Mta, 3).unwrap().is_empty());
    }
}
