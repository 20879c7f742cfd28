use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four clause families covered by the shipped templates.
///
/// Base Currency and Eligible Currency share one combined template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseKind {
    BaseAndEligibleCurrency,
    Mta,
    Threshold,
    Rounding,
}

impl ClauseKind {
    pub const ALL: [ClauseKind; 4] =
        [ClauseKind::BaseAndEligibleCurrency, ClauseKind::Mta, ClauseKind::Threshold, ClauseKind::Rounding];

    /// Stable identifier used in file names, registry keys and task ids.
    pub fn slug(self) -> &'static str {
        match self {
            ClauseKind::BaseAndEligibleCurrency => "base-and-eligible-currency",
            ClauseKind::Mta => "mta",
            ClauseKind::Threshold => "threshold",
            ClauseKind::Rounding => "rounding",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ClauseKind::BaseAndEligibleCurrency => "Base and Eligible Currency",
            ClauseKind::Mta => "MTA",
            ClauseKind::Threshold => "Threshold",
            ClauseKind::Rounding => "Rounding",
        }
    }

    /// Phrases whose presence marks a paragraph as relevant to the clause.
    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            ClauseKind::BaseAndEligibleCurrency => &["base currency", "eligible currency"],
            ClauseKind::Mta => &["minimum transfer amount"],
            ClauseKind::Threshold => &["threshold"],
            ClauseKind::Rounding => &["rounding", "rounded"],
        }
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{value}`")]
pub struct UnknownName {
    pub what: &'static str,
    pub value: String,
}

impl FromStr for ClauseKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('_', "-");
        ClauseKind::ALL
            .into_iter()
            .find(|c| c.slug() == wanted)
            .ok_or_else(|| UnknownName { what: "clause", value: s.to_string() })
    }
}

/// Whether the prompt is augmented with retrieved examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    WithRag,
    WithoutRag,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::WithRag, Mode::WithoutRag];

    pub fn slug(self) -> &'static str {
        match self {
            Mode::WithRag => "with-rag",
            Mode::WithoutRag => "without-rag",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Mode::WithRag => "With RAG",
            Mode::WithoutRag => "Without RAG",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Mode {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.slug() == wanted)
            .ok_or_else(|| UnknownName { what: "mode", value: s.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_round_trip() {
        for clause in ClauseKind::ALL {
            assert_eq!(clause.slug().parse::<ClauseKind>().unwrap(), clause);
            let json = serde_json::to_string(&clause).unwrap();
            assert_eq!(json, format!("\"{}\"", clause.slug()));
        }
        for mode in Mode::ALL {
            assert_eq!(mode.slug().parse::<Mode>().unwrap(), mode);
        }
        assert_eq!("WITH_RAG".parse::<Mode>().unwrap(), Mode::WithRag);
        assert!("rag".parse::<Mode>().is_err());
        assert!("collateral".parse::<ClauseKind>().is_err());
    }
}
