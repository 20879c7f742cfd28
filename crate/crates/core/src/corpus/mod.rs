//! Contract corpus: plain-text contracts with per-clause ground truth.
//!
//! On disk:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/docs/<id>/contract.txt
//! <dir>/docs/<id>/truth/<clause>.json
//! ```
//!
//! A missing truth file means the clause does not apply to that contract.

mod generator;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clause::ClauseKind;

pub use generator::{generate_corpus, GeneratorOptions, DEFAULT_SEED};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no manifest.json in {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("ground truth for `{doc}` clause `{clause}` is not valid JSON: {detail}")]
    GroundTruth { doc: String, clause: String, detail: String },
    #[error("unknown document id `{0}`")]
    UnknownDoc(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub source: String,
    /// Document ids in corpus order.
    pub docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractDoc {
    pub id: String,
    pub text: String,
    pub ground_truth: BTreeMap<ClauseKind, Value>,
}

impl ContractDoc {
    pub fn truth(&self, clause: ClauseKind) -> Option<&Value> {
        self.ground_truth.get(&clause)
    }

    pub fn applies(&self, clause: ClauseKind) -> bool {
        self.ground_truth.contains_key(&clause)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    manifest: Manifest,
    docs: Vec<ContractDoc>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Assembles a corpus; the manifest's doc list is rewritten to match `docs`.
    pub fn new(mut manifest: Manifest, docs: Vec<ContractDoc>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        manifest.docs = docs.iter().map(|d| d.id.clone()).collect();
        Ok(Self { manifest, docs, by_id })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn docs(&self) -> &[ContractDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc(&self, id: &str) -> Option<&ContractDoc> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Number of documents with ground truth for `clause`.
    pub fn applicable_count(&self, clause: ClauseKind) -> usize {
        self.docs.iter().filter(|d| d.applies(clause)).count()
    }

    /// Every document except `excluded_id`.
    pub fn leave_one_out(&self, excluded_id: &str) -> Result<CorpusView<'_>, CorpusError> {
        let excluded = self.position(excluded_id).ok_or_else(|| CorpusError::UnknownDoc(excluded_id.to_string()))?;
        Ok(CorpusView { corpus: self, excluded })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        let docs_dir = dir.join("docs");
        fs::create_dir_all(&docs_dir).map_err(io_err(&docs_dir))?;
        let manifest_path = dir.join("manifest.json");
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;
        for doc in &self.docs {
            let truth_dir = docs_dir.join(&doc.id).join("truth");
            fs::create_dir_all(&truth_dir).map_err(io_err(&truth_dir))?;
            let contract = docs_dir.join(&doc.id).join("contract.txt");
            fs::write(&contract, &doc.text).map_err(io_err(&contract))?;
            for (clause, truth) in &doc.ground_truth {
                let path = truth_dir.join(format!("{}.json", clause.slug()));
                let text = serde_json::to_string_pretty(truth).expect("truth serializes") + "\n";
                fs::write(&path, text).map_err(io_err(&path))?;
            }
        }
        Ok(())
    }
}

/// Read-only view of a corpus with one document left out.
#[derive(Debug, Clone, Copy)]
pub struct CorpusView<'a> {
    corpus: &'a Corpus,
    excluded: usize,
}

impl<'a> CorpusView<'a> {
    pub fn excluded_id(&self) -> &'a str {
        &self.corpus.docs[self.excluded].id
    }

    pub fn len(&self) -> usize {
        self.corpus.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: &str) -> bool {
        self.corpus.position(id).is_some_and(|i| i != self.excluded)
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a ContractDoc> + 'a {
        let excluded = self.excluded;
        self.corpus.docs.iter().enumerate().filter(move |(i, _)| *i != excluded).map(|(_, d)| d)
    }
}

pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(CorpusError::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CorpusError::Manifest { path: manifest_path.clone(), detail: e.to_string() })?;

    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(manifest.docs.len());
    for id in &manifest.docs {
        if !seen.insert(id.as_str()) {
            return Err(CorpusError::DuplicateId(id.clone()));
        }
        docs.push(load_doc(&dir.join("docs").join(id), id)?);
    }
    Corpus::new(manifest, docs)
}

fn load_doc(dir: &Path, id: &str) -> Result<ContractDoc, CorpusError> {
    let contract = dir.join("contract.txt");
    let text = fs::read_to_string(&contract).map_err(io_err(&contract))?;
    let mut ground_truth = BTreeMap::new();
    let truth_dir = dir.join("truth");
    if truth_dir.is_dir() {
        for clause in ClauseKind::ALL {
            let path = truth_dir.join(format!("{}.json", clause.slug()));
            if !path.exists() {
                continue;
            }
            let raw = fs::read_to_string(&path).map_err(io_err(&path))?;
            let value = serde_json::from_str(&raw).map_err(|e| CorpusError::GroundTruth {
                doc: id.to_string(),
                clause: clause.slug().to_string(),
                detail: e.to_string(),
            })?;
            ground_truth.insert(clause, value);
        }
    }
    Ok(ContractDoc { id: id.to_string(), text, ground_truth })
}

/// Paragraphs of `text` mentioning any keyword of `clause`, or the whole
/// text when none do. Paragraphs are separated by blank lines.
pub fn clause_excerpt(text: &str, clause: ClauseKind) -> String {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }

    let hits: Vec<&String> = paragraphs
        .iter()
        .filter(|p| {
            let lower = p.to_lowercase();
            clause.keywords().iter().any(|k| lower.contains(k))
        })
        .collect();
    if hits.is_empty() {
        text.to_string()
    } else {
        hits.iter().map(|p| p.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tiny(ids: &[&str]) -> Corpus {
        let docs = ids
            .iter()
            .map(|id| ContractDoc { id: id.to_string(), text: format!("contract {id}"), ground_truth: BTreeMap::new() })
            .collect();
        Corpus::new(Manifest { name: "t".into(), source: String::new(), docs: vec![] }, docs).unwrap()
    }

    #[test]
    fn leave_one_out_excludes_only_the_query() {
        let corpus = tiny(&["a", "b", "c"]);
        let view = corpus.leave_one_out("b").unwrap();
        assert_eq!(view.len(), 2);
        assert!(!view.contains("b"));
        assert!(view.contains("a") && view.contains("c"));
        assert_eq!(view.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), vec!["a", "c"]);
    }

    #[test]
    fn single_doc_view_is_empty() {
        let corpus = tiny(&["only"]);
        let view = corpus.leave_one_out("only").unwrap();
        assert!(view.is_empty());
        assert_eq!(view.iter().count(), 0);
    }

    #[test]
    fn unknown_id_errors() {
        assert!(matches!(tiny(&["a"]).leave_one_out("z"), Err(CorpusError::UnknownDoc(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let docs = vec![
            ContractDoc { id: "a".into(), text: String::new(), ground_truth: BTreeMap::new() },
            ContractDoc { id: "a".into(), text: String::new(), ground_truth: BTreeMap::new() },
        ];
        let manifest = Manifest { name: "t".into(), source: String::new(), docs: vec![] };
        assert!(matches!(Corpus::new(manifest, docs), Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn empty_directory_has_no_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::MissingManifest(_))));
    }

    #[test]
    fn malformed_truth_names_doc_and_clause() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny(&["doc-1"]);
        corpus.write(dir.path()).unwrap();
        let truth_dir = dir.path().join("docs/doc-1/truth");
        fs::write(truth_dir.join("mta.json"), "{\"agreementTerms\": ").unwrap();
        match load_corpus(dir.path()).unwrap_err() {
            CorpusError::GroundTruth { doc, clause, .. } => {
                assert_eq!(doc, "doc-1");
                assert_eq!(clause, "mta");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_duplicate_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        tiny(&["a"]).write(dir.path()).unwrap();
        fs::write(dir.path().join("manifest.json"), r#"{"name":"t","docs":["a","a"]}"#).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn excerpt_picks_keyword_paragraphs() {
        let text = format!("Preamble text.\n\n{}\n\nGoverning law: England.", fixtures::MTA_EXCERPT.trim());
        let excerpt = clause_excerpt(&text, ClauseKind::Mta);
        assert!(excerpt.contains("Minimum Transfer Amount"));
        assert!(!excerpt.contains("Preamble"));
        assert!(!excerpt.contains("Governing law"));
        assert_eq!(excerpt.split("\n\n").count(), 3);
    }

    #[test]
    fn excerpt_falls_back_to_full_text() {
        let text = "Nothing relevant here.\n\nStill nothing.";
        assert_eq!(clause_excerpt(text, ClauseKind::Rounding), text);
    }
}
