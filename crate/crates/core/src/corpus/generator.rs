//! Synthetic CSA corpus.
//!
//! Produces contracts whose Paragraph 13 elections are drawn from a seeded
//! RNG, together with matching ground truth. The first contract carries the
//! verbatim MTA excerpt and its published CDM representation. The Threshold
//! clause applies to a fixed-size subset of the contracts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{ContractDoc, Corpus, Manifest};
use crate::clause::ClauseKind;
use crate::fixtures;

pub const DEFAULT_SEED: u64 = 0x00C5_A2CD;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorOptions {
    pub seed: u64,
    pub docs: usize,
    /// How many contracts carry a Threshold election.
    pub threshold_docs: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, docs: 60, threshold_docs: 37 }
    }
}

const CURRENCIES: &[(&str, &str)] = &[
    ("USD", "US Dollars"),
    ("EUR", "Euro"),
    ("GBP", "Pounds Sterling"),
    ("JPY", "Japanese Yen"),
    ("CHF", "Swiss Francs"),
    ("CAD", "Canadian Dollars"),
    ("AUD", "Australian Dollars"),
];

const PARTIES: &[&str] = &[
    "Northbridge Capital Markets plc",
    "Halvorsen Bank ASA",
    "Meridian Pension Trust",
    "Castellan Securities LLC",
    "Aurelian Insurance Company",
    "Keswick Global Macro Fund Ltd",
    "Banco Litoral S.A.",
    "Tamsin Asset Management LP",
    "Oakridge Municipal Utility",
    "Suzuran Trust and Banking Co., Ltd.",
    "Verity Commodities Trading AG",
    "Plover Street Bank N.A.",
];

const MTA_AMOUNTS: &[u64] = &[100_000, 250_000, 500_000, 1_000_000, 5_000_000];
const THRESHOLD_AMOUNTS: &[u64] = &[0, 1_000_000, 10_000_000, 25_000_000, 50_000_000];
const ROUNDING_AMOUNTS: &[u64] = &[1_000, 10_000, 50_000, 100_000];

const FILLER: &[&str] = &[
    "(d) Valuation and Timing.\n(i) \"Valuation Agent\" means, for purposes of Paragraphs 3 and 5, the party making the demand under Paragraph 3.\n(ii) \"Valuation Date\" means each Local Business Day.\n(iii) \"Notification Time\" means 1:00 p.m., New York time, on a Local Business Day.",
    "(e) Conditions Precedent and Secured Party's Rights and Remedies. Each Termination Event specified in the Schedule will be a \"Specified Condition\" for the party specified.",
    "(f) Substitution. \"Substitution Date\" has the meaning specified in Paragraph 4(d)(ii). Consent of the Secured Party is not required for any substitution.",
    "(g) Dispute Resolution. \"Resolution Time\" means 1:00 p.m., New York time, on the Local Business Day following the date on which notice of the dispute is given.",
    "(h) Holding and Using Posted Collateral. The Custodian for each party shall be a bank with assets of at least ten billion dollars. The provisions of Paragraph 6(c) will apply to each party.",
    "(i) Distributions and Interest Amount. The \"Interest Rate\" in relation to each Eligible Currency specified below shall be the overnight rate published by the relevant central bank.",
    "(j) Addresses for Transfers. As agreed between the parties from time to time in writing.",
    "(k) Other Provisions. This Annex shall be governed by and construed in accordance with the laws of the State of New York.",
];

fn format_amount(amount: u64) -> String {
    let digits = amount.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn elections(inner: Value) -> Value {
    json!({"agreementTerms": {"agreement": {"creditSupportAgreementElections": inner}}})
}

fn fixed_amount_entry(key: &str, amount: u64, currency: &str, party: &str) -> Value {
    json!({ key: {"fixedAmount": {"amount": amount, "currency": currency, "party": party}} })
}

struct Draft {
    text: Vec<String>,
    truth: BTreeMap<ClauseKind, Value>,
}

pub fn generate_corpus(options: GeneratorOptions) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let ids: Vec<String> = (1..=options.docs).map(|i| format!("csa-{i:03}")).collect();
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut rng);
    let with_threshold: Vec<&String> = shuffled.iter().take(options.threshold_docs.min(options.docs)).collect();

    let docs = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let verbatim = i == 0;
            let threshold = with_threshold.contains(&id);
            generate_doc(&mut rng, id, verbatim, threshold)
        })
        .collect();

    let manifest = Manifest {
        name: "synthetic-csa".into(),
        source: format!(
            "synthetic Credit Support Annex elections (seed {}); {} contracts, Threshold applicable to {}",
            options.seed,
            options.docs,
            with_threshold.len()
        ),
        docs: Vec::new(),
    };
    Corpus::new(manifest, docs).expect("generated ids are unique")
}

fn generate_doc(rng: &mut ChaCha8Rng, id: &str, verbatim: bool, threshold: bool) -> ContractDoc {
    let party_a = *PARTIES.choose(rng).unwrap();
    let party_b = loop {
        let p = *PARTIES.choose(rng).unwrap();
        if p != party_a {
            break p;
        }
    };
    let base = if verbatim { CURRENCIES[0] } else { *CURRENCIES.choose(rng).unwrap() };
    let day = rng.gen_range(1..=28);
    let month = ["January", "March", "May", "July", "September", "November"].choose(rng).unwrap();
    let year = rng.gen_range(2004..=2023);

    let mut draft = Draft { text: Vec::new(), truth: BTreeMap::new() };
    draft.text.push(format!(
        "CREDIT SUPPORT ANNEX\nto the Schedule to the ISDA Master Agreement dated as of {month} {day}, {year} between {party_a} (\"Party A\") and {party_b} (\"Party B\")."
    ));
    draft.text.push(
        "This Annex supplements, forms part of, and is subject to, the ISDA Master Agreement referred to above and is part of its Schedule.".into(),
    );
    draft.text.push("Paragraph 13. Elections and Variables.".into());
    draft.text.push(
        "(a) Security Interest for \"Obligations\". The term \"Obligations\" as used in this Annex includes no additional obligations with respect to either party.".into(),
    );

    currency_clause(rng, base, &mut draft);
    draft.text.push(
        "(c) Credit Support Obligations.\n(i) Delivery Amount, Return Amount and Credit Support Amount have the meanings specified in Paragraph 3.\n(ii) Eligible Collateral. Cash in an Eligible Currency and negotiable debt obligations issued by the government of the Base Currency jurisdiction.".into(),
    );
    threshold_clause(rng, base, threshold, &mut draft);
    if verbatim {
        draft.text.push(fixtures::MTA_EXCERPT.trim().to_string());
        draft.truth.insert(ClauseKind::Mta, fixtures::mta_example());
    } else {
        mta_clause(rng, base, &mut draft);
    }
    rounding_clause(rng, base, &mut draft);

    let mut filler: Vec<&str> = FILLER.to_vec();
    filler.shuffle(rng);
    let keep = rng.gen_range(2..=FILLER.len());
    draft.text.extend(filler.into_iter().take(keep).map(str::to_string));

    let mut text = draft.text.join("\n\n");
    text.push('\n');
    ContractDoc { id: id.to_string(), text, ground_truth: draft.truth }
}

fn currency_clause(rng: &mut ChaCha8Rng, base: (&str, &str), draft: &mut Draft) {
    let mut others: Vec<(&str, &str)> = CURRENCIES.iter().copied().filter(|c| c.0 != base.0).collect();
    others.shuffle(rng);
    others.truncate(rng.gen_range(0..=2));
    let listed = if others.is_empty() {
        "none".to_string()
    } else {
        others.iter().map(|c| c.1).collect::<Vec<_>>().join(" and ")
    };
    draft.text.push(format!(
        "(b) Base Currency and Eligible Currency.\n(i) \"Base Currency\" means {}.\n(ii) \"Eligible Currency\" means the Base Currency and each other currency specified here: {listed}.",
        base.1
    ));
    let eligible: Vec<&str> = std::iter::once(base.0).chain(others.iter().map(|c| c.0)).collect();
    draft.truth.insert(
        ClauseKind::BaseAndEligibleCurrency,
        elections(json!({"baseAndEligibleCurrency": {"baseCurrency": base.0, "eligibleCurrency": eligible}})),
    );
}

fn threshold_clause(rng: &mut ChaCha8Rng, base: (&str, &str), applicable: bool, draft: &mut Draft) {
    if !applicable {
        draft.text.push(
            "(iii) Thresholds. No Threshold is specified for either party and the related provisions of Paragraph 3 do not apply.".into(),
        );
        return;
    }
    let a = *THRESHOLD_AMOUNTS.choose(rng).unwrap();
    let b = *THRESHOLD_AMOUNTS.choose(rng).unwrap();
    draft.text.push(format!(
        "(iii) Thresholds.\n(A) \"Threshold\" means with respect to Party A: {cur} {}. \"Threshold\" means with respect to Party B: {cur} {}.",
        format_amount(a),
        format_amount(b),
        cur = base.1
    ));
    draft.truth.insert(
        ClauseKind::Threshold,
        elections(json!({"threshold": [
            fixed_amount_entry("thresholdType", a, base.0, "PARTY_1"),
            fixed_amount_entry("thresholdType", b, base.0, "PARTY_2"),
        ]})),
    );
}

fn mta_clause(rng: &mut ChaCha8Rng, base: (&str, &str), draft: &mut Draft) {
    let a = *MTA_AMOUNTS.choose(rng).unwrap();
    let b = if rng.gen_bool(0.6) { a } else { *MTA_AMOUNTS.choose(rng).unwrap() };
    draft.text.push(format!(
        "(iv) Minimum Transfer Amount.\n(B) \"Minimum Transfer Amount\" means with respect to Party A: {cur} {}. \"Minimum Transfer Amount\" means with respect to Party B: {cur} {}.",
        format_amount(a),
        format_amount(b),
        cur = base.1
    ));
    draft.truth.insert(
        ClauseKind::Mta,
        elections(json!({"minimumTransferAmount": [
            fixed_amount_entry("mtaType", a, base.0, "PARTY_1"),
            fixed_amount_entry("mtaType", b, base.0, "PARTY_2"),
        ]})),
    );
}

fn rounding_clause(rng: &mut ChaCha8Rng, base: (&str, &str), draft: &mut Draft) {
    let amount = *ROUNDING_AMOUNTS.choose(rng).unwrap();
    let (delivery, ret) = if rng.gen_bool(0.75) { ("UP", "DOWN") } else { ("NEAREST", "NEAREST") };
    let phrase = |direction: &str| match direction {
        "UP" => "rounded up",
        "DOWN" => "rounded down",
        _ => "rounded",
    };
    draft.text.push(format!(
        "(v) Rounding. The Delivery Amount will be {} and the Return Amount will be {} to the nearest integral multiple of {} {}.",
        phrase(delivery),
        phrase(ret),
        base.1,
        format_amount(amount)
    ));
    draft.truth.insert(
        ClauseKind::Rounding,
        elections(json!({"rounding": {
            "deliveryAmount": {"roundingDirection": delivery, "amount": amount, "currency": base.0},
            "returnAmount": {"roundingDirection": ret, "amount": amount, "currency": base.0},
        }})),
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands_separators() {
        assert_eq!(format_amount(0), "0");
        assert_eq!(format_amount(1_000), "1,000");
        assert_eq!(format_amount(5_000_000), "5,000,000");
        assert_eq!(format_amount(250_000), "250,000");
    }

    #[test]
    fn default_corpus_shape() {
        let corpus = generate_corpus(GeneratorOptions::default());
        assert_eq!(corpus.len(), 60);
        assert_eq!(corpus.applicable_count(ClauseKind::Threshold), 37);
        for clause in [ClauseKind::BaseAndEligibleCurrency, ClauseKind::Mta, ClauseKind::Rounding] {
            assert_eq!(corpus.applicable_count(clause), 60);
        }
        let first = &corpus.docs()[0];
        assert!(first.text.contains(fixtures::MTA_EXCERPT.trim()));
        assert_eq!(first.truth(ClauseKind::Mta), Some(&fixtures::mta_example()));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate_corpus(GeneratorOptions::default());
        let b = generate_corpus(GeneratorOptions::default());
        assert_eq!(a, b);
        let c = generate_corpus(GeneratorOptions { seed: 7, ..Default::default() });
        assert_ne!(a, c);
    }
}
