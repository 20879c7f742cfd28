//! Schema-driven conversion of Credit Support Annex clauses into CDM-style
//! JSON, with retrieval-augmented prompting and an evaluation harness.
//!
//! The workflow has three stages:
//!
//! 1. [`template`]: prune the schema down to one minimal skeleton per clause.
//! 2. [`llm`]: ask a chat-completion backend to fill the skeleton, optionally
//!    with examples from [`retrieval`], and check the result with
//!    [`conformance`].
//! 3. [`evaluator`]: score outputs against ground truth and rank them against
//!    published reference scores.

pub mod clause;
pub mod conformance;
pub mod corpus;
pub mod evaluator;
pub mod fixtures;
pub mod llm;
pub mod retrieval;
pub mod review;
pub mod run;
pub mod schema;
pub mod template;

pub use clause::{ClauseKind, Mode};
pub use conformance::{check_conformance, ConformanceReport, ValidationMode, Violation};
pub use schema::{parse_schema, FieldPath, SchemaGraph, SchemaNode};
pub use template::{builtin_targets, generate_all, generate_template, render, Template, TargetRegistry, TargetSet};
