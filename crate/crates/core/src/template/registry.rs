use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::clause::ClauseKind;
use crate::fixtures;
use crate::schema::{FieldPath, SchemaGraph};

use super::TemplateError;

/// The schema fields a clause template must expose for filling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSet {
    pub clause: ClauseKind,
    pub targets: Vec<FieldPath>,
}

impl TargetSet {
    /// Builds a target set, dropping duplicate paths while keeping first-seen order.
    pub fn new(clause: ClauseKind, targets: impl IntoIterator<Item = FieldPath>) -> Result<Self, TemplateError> {
        let mut unique: Vec<FieldPath> = Vec::new();
        for path in targets {
            if !unique.contains(&path) {
                unique.push(path);
            }
        }
        if unique.is_empty() {
            return Err(TemplateError::EmptyTargets(clause));
        }
        Ok(Self { clause, targets: unique })
    }

    pub fn check(&self, graph: &SchemaGraph) -> Result<(), TemplateError> {
        for path in &self.targets {
            let node = graph
                .resolve(path)
                .map_err(|source| TemplateError::Unresolvable { path: path.clone(), source })?;
            if !node.kind().is_leaf() {
                return Err(TemplateError::NonLeafTarget { path: path.clone(), kind: node.kind() });
            }
        }
        Ok(())
    }
}

/// Clause → target paths mapping, loaded from a JSON file of the form
/// `{"mta": ["a/b[]/c", ...], ...}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetRegistry {
    entries: IndexMap<ClauseKind, TargetSet>,
}

impl TargetRegistry {
    pub fn builtin() -> Self {
        Self::from_json(fixtures::TARGETS).expect("bundled target registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let raw: IndexMap<ClauseKind, Vec<FieldPath>> =
            serde_json::from_str(text).map_err(|e| TemplateError::Registry(e.to_string()))?;
        let mut entries = IndexMap::new();
        for (clause, paths) in raw {
            entries.insert(clause, TargetSet::new(clause, paths)?);
        }
        Ok(Self { entries })
    }

    /// Entries from `overrides` replace the corresponding clauses here.
    pub fn with_overrides(mut self, overrides: TargetRegistry) -> Self {
        for (clause, set) in overrides.entries {
            self.entries.insert(clause, set);
        }
        self
    }

    pub fn get(&self, clause: ClauseKind) -> Option<&TargetSet> {
        self.entries.get(&clause)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TargetSet> {
        self.entries.values()
    }
}

/// The shipped target set for `clause`.
pub fn builtin_targets(clause: ClauseKind) -> TargetSet {
    TargetRegistry::builtin()
        .get(clause)
        .cloned()
        .expect("bundled registry covers every clause")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MTA_PREFIX: &str = "agreementTerms/agreement/creditSupportAgreementElections/minimumTransferAmount[]/mtaType/fixedAmount";

    #[test]
    fn mta_targets_follow_worked_example() {
        let set = builtin_targets(ClauseKind::Mta);
        let rendered: Vec<String> = set.targets.iter().map(ToString::to_string).collect();
        for leaf in ["amount", "currency", "party"] {
            assert!(rendered.contains(&format!("{MTA_PREFIX}/{leaf}")), "missing {leaf}");
        }
    }

    #[test]
    fn currency_template_is_combined() {
        let set = builtin_targets(ClauseKind::BaseAndEligibleCurrency);
        let rendered: Vec<String> = set.targets.iter().map(ToString::to_string).collect();
        assert!(rendered.iter().any(|p| p.ends_with("baseCurrency")));
        assert!(rendered.iter().any(|p| p.ends_with("eligibleCurrency[]")));
    }

    #[test]
    fn registry_is_complete_and_distinct() {
        let registry = TargetRegistry::builtin();
        let graph = fixtures::cdm_schema();
        let sets: Vec<_> = ClauseKind::ALL.iter().map(|c| registry.get(*c).unwrap()).collect();
        assert_eq!(sets.len(), 4);
        for (i, a) in sets.iter().enumerate() {
            a.check(&graph).unwrap();
            for b in &sets[i + 1..] {
                assert_ne!(a.targets, b.targets);
            }
        }
    }

    #[test]
    fn overrides_replace_entries() {
        let custom = TargetRegistry::from_json(
            r#"{"mta": ["agreementTerms/agreement/creditSupportAgreementElections/valuationAgent"]}"#,
        )
        .unwrap();
        let merged = TargetRegistry::builtin().with_overrides(custom);
        assert_eq!(merged.get(ClauseKind::Mta).unwrap().targets.len(), 1);
        assert_eq!(merged.get(ClauseKind::Rounding), TargetRegistry::builtin().get(ClauseKind::Rounding));
    }

    #[test]
    fn registry_rejects_unknown_clause_and_empty_lists() {
        assert!(TargetRegistry::from_json(r#"{"collateral": ["a"]}"#).is_err());
        assert!(matches!(
            TargetRegistry::from_json(r#"{"mta": []}"#),
            Err(TemplateError::EmptyTargets(ClauseKind::Mta))
        ));
    }
}
