use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clause::{ClauseKind, Mode};
use crate::fixtures;

use super::store::{ScoreStore, StoreError, TaskKey};

pub const NO_DATA: &str = "no data";
/// Document id under which published scores are seeded.
pub const PUBLISHED_DOC: &str = "published";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: String,
    pub params: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub model: String,
    pub params: String,
    pub scores: Vec<f64>,
    pub ranks: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScoreTable {
    pub title: String,
    pub rows: Vec<ReferenceRow>,
    pub published: PublishedRow,
}

/// Comparative reference scores for both modes, columns in [`ClauseKind::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScoreTables {
    pub version: u32,
    pub columns: Vec<ClauseKind>,
    pub tables: BTreeMap<Mode, ReferenceScoreTable>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("invalid reference table: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reference table is inconsistent: {0}")]
    Shape(String),
}

impl ReferenceScoreTables {
    pub fn builtin() -> Self {
        Self::from_json(fixtures::REFERENCE_SCORES).expect("bundled reference scores are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ReferenceError> {
        let tables: Self = serde_json::from_str(text)?;
        for clause in ClauseKind::ALL {
            if !tables.columns.contains(&clause) {
                return Err(ReferenceError::Shape(format!("missing column {clause}")));
            }
        }
        for mode in Mode::ALL {
            let table = tables.tables.get(&mode).ok_or_else(|| ReferenceError::Shape(format!("missing table {mode}")))?;
            let width = tables.columns.len();
            if table.rows.iter().any(|r| r.scores.len() != width) || table.published.scores.len() != width {
                return Err(ReferenceError::Shape(format!("{mode}: rows must have {width} scores")));
            }
        }
        Ok(tables)
    }

    pub fn table(&self, mode: Mode) -> &ReferenceScoreTable {
        &self.tables[&mode]
    }

    fn column(&self, clause: ClauseKind) -> usize {
        self.columns.iter().position(|c| *c == clause).expect("validated on load")
    }

    pub fn column_scores(&self, mode: Mode, clause: ClauseKind) -> Vec<f64> {
        let i = self.column(clause);
        self.table(mode).rows.iter().map(|r| r.scores[i]).collect()
    }

    pub fn published_score(&self, mode: Mode, clause: ClauseKind) -> f64 {
        self.table(mode).published.scores[self.column(clause)]
    }

    pub fn published_rank(&self, mode: Mode, clause: ClauseKind) -> u32 {
        self.table(mode).published.ranks[self.column(clause)]
    }
}

/// `1 + |{reference scores strictly greater than score}|`; ties share the better rank.
pub fn rank_against_reference(score: f64, tables: &ReferenceScoreTables, mode: Mode, clause: ClauseKind) -> u32 {
    1 + tables.column_scores(mode, clause).iter().filter(|&&r| r > score).count() as u32
}

/// Loads the published scores as one pseudo-document per clause and mode.
pub fn seed_published(store: &mut ScoreStore, tables: &ReferenceScoreTables) -> Result<(), StoreError> {
    for mode in Mode::ALL {
        for clause in ClauseKind::ALL {
            store.insert_auto(TaskKey::new(PUBLISHED_DOC, clause, mode), tables.published_score(mode, clause))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    /// Documents each clause applies to, when known.
    #[serde(default)]
    pub applicable_docs: BTreeMap<ClauseKind, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub clause: ClauseKind,
    pub mode: Mode,
    pub mean: Option<f64>,
    pub rank: Option<u32>,
    pub docs_evaluated: usize,
    pub manual_scored: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applicable_docs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub provenance: Provenance,
    pub cells: Vec<ReportCell>,
    pub reference: ReferenceScoreTables,
}

impl BenchmarkReport {
    pub fn cell(&self, clause: ClauseKind, mode: Mode) -> &ReportCell {
        self.cells.iter().find(|c| c.clause == clause && c.mode == mode).expect("report covers every cell")
    }

    /// Ranks for `mode` in column order; `None` where nothing was evaluated.
    pub fn rank_row(&self, mode: Mode) -> Vec<Option<u32>> {
        ClauseKind::ALL.iter().map(|&c| self.cell(c, mode).rank).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// One table per mode, shaped like the reference tables with this run appended.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Benchmark report\n\n");
        let p = &self.provenance;
        for (label, value) in [("Run", &p.run_id), ("Backend", &p.backend), ("Config digest", &p.config_digest)] {
            if let Some(value) = value {
                out.push_str(&format!("- {label}: `{value}`\n"));
            }
        }
        if p.run_id.is_some() || p.backend.is_some() || p.config_digest.is_some() {
            out.push('\n');
        }
        let header: Vec<&str> = ClauseKind::ALL.iter().map(|c| c.title()).collect();
        for mode in Mode::ALL {
            let table = self.reference.table(mode);
            out.push_str(&format!("## {}\n\n", table.title));
            out.push_str(&format!("| Model | Params | {} |\n", header.join(" | ")));
            out.push_str(&format!("|---|---|{}\n", "---:|".repeat(header.len())));
            for row in &table.rows {
                let scores: Vec<String> =
                    ClauseKind::ALL.iter().map(|&c| format!("{:.2}", row.scores[self.reference.column(c)])).collect();
                out.push_str(&format!("| {} | {} | {} |\n", row.model, row.params, scores.join(" | ")));
            }
            let cells: Vec<&ReportCell> = ClauseKind::ALL.iter().map(|&c| self.cell(c, mode)).collect();
            let means: Vec<String> =
                cells.iter().map(|c| c.mean.map_or(NO_DATA.to_string(), |m| format!("{m:.2}"))).collect();
            let ranks: Vec<String> =
                cells.iter().map(|c| c.rank.map_or(NO_DATA.to_string(), |r| r.to_string())).collect();
            let evaluated: Vec<String> = cells
                .iter()
                .map(|c| match c.applicable_docs {
                    Some(n) => format!("{}/{n}", c.docs_evaluated),
                    None => c.docs_evaluated.to_string(),
                })
                .collect();
            out.push_str(&format!("| **This run** | | {} |\n", means.join(" | ")));
            out.push_str(&format!(
                "| Rank (out of {} models) | | {} |\n",
                table.rows.len() + 1,
                ranks.join(" | ")
            ));
            out.push_str(&format!("| Docs evaluated | | {} |\n\n", evaluated.join(" | ")));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        crate::run::write_atomic(&dir.join("report.json"), self.to_json().as_bytes())?;
        crate::run::write_atomic(&dir.join("report.md"), self.to_markdown().as_bytes())
    }
}

/// Per-clause, per-mode means and ranks. Clauses with no evaluated documents
/// get no mean and no rank.
pub fn emit_report(store: &ScoreStore, tables: &ReferenceScoreTables, provenance: Provenance) -> BenchmarkReport {
    let mut cells = Vec::new();
    for mode in Mode::ALL {
        for clause in ClauseKind::ALL {
            let summary = store.summary(clause, mode);
            cells.push(ReportCell {
                clause,
                mode,
                mean: summary.mean,
                rank: summary.mean.map(|m| rank_against_reference(m, tables, mode, clause)),
                docs_evaluated: summary.docs_evaluated,
                manual_scored: summary.manual_scored,
                applicable_docs: provenance.applicable_docs.get(&clause).copied(),
            });
        }
    }
    BenchmarkReport { provenance, cells, reference: tables.clone() }
}
