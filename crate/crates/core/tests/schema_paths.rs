//! Leaf paths of the bundled schema, checked against a list produced by an
//! independent exhaustive walk of the schema file.

use cdmizer_core::fixtures;
use cdmizer_core::schema::{FieldPath, DEFAULT_MAX_DEPTH};

const CSA: &str = "agreementTerms/agreement/creditSupportAgreementElections";

fn expected() -> Vec<String> {
    let mut paths: Vec<String> = [
        "baseAndEligibleCurrency/baseCurrency",
        "baseAndEligibleCurrency/eligibleCurrency[]",
        "minimumTransferAmount[]/mtaType/fixedAmount/amount",
        "minimumTransferAmount[]/mtaType/fixedAmount/currency",
        "minimumTransferAmount[]/mtaType/fixedAmount/party",
        "minimumTransferAmount[]/mtaType/zeroAmount",
        "minimumTransferAmount[]/mtaType/infiniteAmount",
        "minimumTransferAmount[]/mtaType/customElection",
        "threshold[]/thresholdType/fixedAmount/amount",
        "threshold[]/thresholdType/fixedAmount/currency",
        "threshold[]/thresholdType/fixedAmount/party",
        "threshold[]/thresholdType/zeroAmount",
        "threshold[]/thresholdType/infiniteAmount",
        "threshold[]/thresholdType/customElection",
        "rounding/deliveryAmount/roundingDirection",
        "rounding/deliveryAmount/amount",
        "rounding/deliveryAmount/currency",
        "rounding/returnAmount/roundingDirection",
        "rounding/returnAmount/amount",
        "rounding/returnAmount/currency",
        "independentAmount[]/party",
        "independentAmount[]/amount",
        "independentAmount[]/currency",
        "valuationAgent",
        "creditSupportDocument/documentName",
    ]
    .iter()
    .map(|p| format!("{CSA}/{p}"))
    .collect();
    paths.extend(
        [
            "agreementTerms/agreement/masterAgreementElections/governingLaw",
            "agreementTerms/agreement/masterAgreementElections/agreementDate",
            "agreementTerms/counterparty[]/role",
            "agreementTerms/counterparty[]/partyName",
        ]
        .map(String::from),
    );
    paths
}

#[test]
fn enumerated_leaf_paths_match_exhaustive_walk() {
    let graph = fixtures::cdm_schema();
    let actual: Vec<String> = graph.enumerate_leaf_paths(DEFAULT_MAX_DEPTH).iter().map(ToString::to_string).collect();
    assert_eq!(actual.len(), 29);
    assert_eq!(actual, expected());
}

#[test]
fn every_leaf_path_resolves_to_a_leaf() {
    let graph = fixtures::cdm_schema();
    for text in expected() {
        let path: FieldPath = text.parse().unwrap();
        assert!(graph.resolve(&path).unwrap().kind().is_leaf(), "{text}");
    }
}

#[test]
fn depth_limit_drops_long_paths() {
    let graph = fixtures::cdm_schema();
    let shallow = graph.enumerate_leaf_paths(4);
    assert!(shallow.iter().all(|p| p.len() <= 4));
    let expected_shallow = expected().iter().filter(|p| p.parse::<FieldPath>().unwrap().len() <= 4).count();
    assert_eq!(shallow.len(), expected_shallow);
}

#[test]
fn self_reference_is_a_cycle_member() {
    let graph = fixtures::cdm_schema();
    assert!(graph.is_cycle_member("CreditSupportDocument"));
    assert!(!graph.is_cycle_member("FixedAmount"));
}
