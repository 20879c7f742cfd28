//! Scoring, aggregation and ranking.
//!
//! The automatic metric is a proxy: the share of normalized ground-truth
//! leaves reproduced at the same path. Manual scores, when present, replace
//! it per task.

mod report;
mod score;
mod store;

pub use report::{
    emit_report, rank_against_reference, seed_published, BenchmarkReport, Provenance, PublishedRow, ReferenceError,
    ReferenceRow, ReferenceScoreTable, ReferenceScoreTables, ReportCell, NO_DATA, PUBLISHED_DOC,
};
pub use score::{auto_score, count_leaves, score_breakdown, ScoreBreakdown};
pub use store::{
    round2, BadTaskId, ClauseSummary, EvaluationRecord, ScoreStore, StoreError, TaskKey, AUTO_SCORER,
};
