use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::clause::{ClauseKind, Mode};
use crate::corpus::ContractDoc;
use crate::fixtures;
use crate::retrieval::RetrievedExample;
use crate::schema::{SchemaGraph, SchemaNode, Segment};
use crate::template::Template;

use super::backend::ChatMessage;

/// Prompt wording, loaded from a versioned TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub version: String,
    pub system: String,
    pub schema_heading: String,
    pub template_heading: String,
    pub examples_heading: String,
    /// Supports `{index}`, `{doc_id}` and `{similarity}`.
    pub example_heading: String,
    pub example_excerpt_label: String,
    pub example_output_label: String,
    pub contract_heading: String,
    pub instructions_heading: String,
    /// Supports `{clause}`.
    pub instructions: String,
    /// Supports `{diagnostics}`.
    pub retry_feedback: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PromptFileError {
    #[error("cannot read prompt file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid prompt file {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

impl PromptSet {
    pub fn builtin() -> Self {
        toml::from_str(fixtures::PROMPTS).expect("bundled prompt file parses")
    }

    pub fn load(path: &Path) -> Result<Self, PromptFileError> {
        let shown = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| PromptFileError::Io { path: shown.clone(), source })?;
        toml::from_str(&text).map_err(|source| PromptFileError::Parse { path: shown, source })
    }

    pub fn feedback(&self, diagnostics: &str) -> String {
        self.retry_feedback.trim().replace("{diagnostics}", diagnostics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    Schema,
    Template,
    Example,
    Contract,
    Instructions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub kind: SectionKind,
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMetadata {
    pub doc_id: String,
    pub clause: ClauseKind,
    pub mode: Mode,
    pub k: usize,
    pub prompt_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub sections: Vec<PromptSection>,
    pub metadata: PromptMetadata,
}

impl PromptBundle {
    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![ChatMessage::system(&self.system), ChatMessage::user(&self.user)]
    }

    pub fn section(&self, kind: SectionKind) -> Option<&PromptSection> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn example_count(&self) -> usize {
        self.sections.iter().filter(|s| s.kind == SectionKind::Example).count()
    }
}

/// Builds the prompt for one clause conversion.
///
/// Section order: schema excerpt, template, examples (with RAG only),
/// contract text, instructions. Examples passed in without-RAG mode are ignored.
pub fn assemble_prompt(
    template: &Template,
    graph: &SchemaGraph,
    doc: &ContractDoc,
    examples: &[RetrievedExample],
    mode: Mode,
    prompts: &PromptSet,
) -> PromptBundle {
    debug_assert!(mode == Mode::WithRag || examples.is_empty(), "examples supplied without RAG");
    let examples: &[RetrievedExample] = if mode == Mode::WithRag { examples } else { &[] };

    let mut sections = vec![
        PromptSection {
            kind: SectionKind::Schema,
            heading: prompts.schema_heading.clone(),
            body: schema_excerpt(graph, template),
        },
        PromptSection { kind: SectionKind::Template, heading: prompts.template_heading.clone(), body: template.render() },
    ];
    for (i, example) in examples.iter().enumerate() {
        let heading = prompts
            .example_heading
            .replace("{index}", &(i + 1).to_string())
            .replace("{doc_id}", &example.doc_id)
            .replace("{similarity}", &format!("{:.4}", example.similarity));
        let truth = serde_json::to_string_pretty(&example.clause_truth).expect("JSON values serialize");
        sections.push(PromptSection {
            kind: SectionKind::Example,
            heading,
            body: format!(
                "{}\n{}\n{}\n{}\n",
                prompts.example_excerpt_label,
                example.excerpt.trim_end(),
                prompts.example_output_label,
                truth
            ),
        });
    }
    sections.push(PromptSection {
        kind: SectionKind::Contract,
        heading: prompts.contract_heading.clone(),
        body: doc.text.clone(),
    });
    sections.push(PromptSection {
        kind: SectionKind::Instructions,
        heading: prompts.instructions_heading.clone(),
        body: prompts.instructions.trim().replace("{clause}", template.clause.title()) + "\n",
    });

    let mut user = String::new();
    let mut examples_started = false;
    for section in &sections {
        if section.kind == SectionKind::Example && !examples_started {
            user.push_str(&prompts.examples_heading);
            user.push_str("\n\n");
            examples_started = true;
        }
        user.push_str(&section.heading);
        user.push('\n');
        user.push_str(&section.body);
        if !section.body.ends_with('\n') {
            user.push('\n');
        }
        user.push('\n');
    }

    PromptBundle {
        system: prompts.system.trim().to_string(),
        user: user.trim_end().to_string() + "\n",
        sections,
        metadata: PromptMetadata {
            doc_id: doc.id.clone(),
            clause: template.clause,
            mode,
            k: examples.len(),
            prompt_version: prompts.version.clone(),
        },
    }
}

/// The schema definitions passed through by the template's placeholder paths,
/// in schema document order.
pub fn schema_excerpt(graph: &SchemaGraph, template: &Template) -> String {
    let mut used = vec![graph.root_name().to_string()];
    for path in &template.placeholder_paths {
        let mut node = graph.root();
        for segment in path.segments() {
            let Some((current, trail)) = graph.deref(node) else { break };
            used.extend(trail.into_iter().map(str::to_string));
            node = match (current, segment) {
                (SchemaNode::Object { children, .. }, Segment::Field(name)) => match children.get(name) {
                    Some(child) => child,
                    None => break,
                },
                (SchemaNode::Array { item }, Segment::Element) => item,
                _ => break,
            };
        }
        if let Some((_, trail)) = graph.deref(node) {
            used.extend(trail.into_iter().map(str::to_string));
        }
    }

    let definitions: Map<String, Value> = graph
        .definitions()
        .iter()
        .filter(|(name, _)| used.contains(name))
        .map(|(name, node)| (name.clone(), node.to_json()))
        .collect();
    let excerpt = serde_json::json!({"root": graph.root_name(), "definitions": definitions});
    serde_json::to_string_pretty(&excerpt).expect("JSON values serialize") + "\n"
}
