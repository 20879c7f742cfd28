//! Shared setup for the benchmarks.

use std::collections::BTreeMap;

use cdmizer_core::corpus::{generate_corpus, Corpus, GeneratorOptions};
use cdmizer_core::fixtures;
use cdmizer_core::llm::{ConversionContext, ConvertSettings, MockBackend, PromptSet};
use cdmizer_core::retrieval::{build_index, RetrievalIndex};
use cdmizer_core::schema::SchemaGraph;
use cdmizer_core::template::{generate_all, TargetRegistry, Template};
use cdmizer_core::ClauseKind;
use serde_json::Value;

pub struct Fixture {
    pub graph: SchemaGraph,
    pub templates: BTreeMap<ClauseKind, Template>,
    pub corpus: Corpus,
    pub index: RetrievalIndex,
    pub prompts: PromptSet,
    pub backend: MockBackend,
}

impl Fixture {
    pub fn load() -> Self {
        let graph = fixtures::cdm_schema();
        let templates = generate_all(&graph, &TargetRegistry::builtin()).expect("builtin targets");
        let corpus = generate_corpus(GeneratorOptions::default());
        let index = build_index(&corpus).expect("fixture corpus indexes");
        let backend = MockBackend::ground_truth(&corpus);
        Fixture { graph, templates, corpus, index, prompts: PromptSet::builtin(), backend }
    }

    pub fn context(&self) -> ConversionContext<'_> {
        ConversionContext {
            graph: &self.graph,
            templates: &self.templates,
            retriever: Some(&self.index),
            backend: &self.backend,
            prompts: &self.prompts,
            settings: ConvertSettings::default(),
        }
    }

    /// Ground truth with the order of every array reversed, so scoring has to
    /// solve a real assignment.
    pub fn reversed_truth(&self, doc: usize, clause: ClauseKind) -> Option<(Value, &Value)> {
        let truth = self.corpus.docs()[doc].truth(clause)?;
        Some((reverse_arrays(truth), truth))
    }
}

fn reverse_arrays(value: &Value) -> Value {
    match value {
        Value::Object(map) => Value::Object(map.iter().map(|(k, v)| (k.clone(), reverse_arrays(v))).collect()),
        Value::Array(items) => Value::Array(items.iter().rev().map(reverse_arrays).collect()),
        other => other.clone(),
    }
}
