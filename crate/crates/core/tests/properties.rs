mod common;

use std::collections::BTreeMap;

use cdmizer_core::conformance::{check_conformance, normalize, validate_against_schema, ValidationMode};
use cdmizer_core::corpus::{generate_corpus, ContractDoc, Corpus, GeneratorOptions, Manifest};
use cdmizer_core::evaluator::{auto_score, score_breakdown};
use cdmizer_core::fixtures;
use cdmizer_core::retrieval::{build_index, ExampleRetriever};
use cdmizer_core::schema::{parse_schema, FieldPath, DEFAULT_MAX_DEPTH};
use cdmizer_core::template::{generate_template, TargetSet};
use cdmizer_core::ClauseKind;
use common::Mutation;
use proptest::prelude::*;
use proptest::sample::subsequence;
use serde_json::json;

fn clause() -> impl Strategy<Value = ClauseKind> {
    prop::sample::select(ClauseKind::ALL.to_vec())
}

fn fixture_corpus() -> &'static Corpus {
    static CORPUS: std::sync::OnceLock<Corpus> = std::sync::OnceLock::new();
    CORPUS.get_or_init(|| generate_corpus(GeneratorOptions::default()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fixture_templates_adhere_to_schema(
        picks in subsequence((0..29usize).collect::<Vec<_>>(), 1..=29),
        clause in clause(),
        seed in any::<u64>(),
    ) {
        let graph = fixtures::cdm_schema();
        let leaves = graph.enumerate_leaf_paths(DEFAULT_MAX_DEPTH);
        let targets = TargetSet::new(clause, picks.iter().map(|&i| leaves[i].clone())).unwrap();
        let template = generate_template(&graph, &targets).unwrap();

        prop_assert_eq!(validate_against_schema(&template.skeleton, &graph, ValidationMode::Template), vec![]);
        for target in &targets.targets {
            prop_assert!(template.placeholder_paths.contains(target), "{} has no placeholder", target);
        }
        let filled = common::fill(&template, &graph, &mut common::rng(seed));
        let report = check_conformance(&filled, &graph, &template);
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn random_schema_templates_adhere(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let mut rng = common::rng(seed);
        let text = common::random_schema(&mut rng);
        let graph = parse_schema(&text).unwrap();
        let leaves = graph.enumerate_leaf_paths(8);
        prop_assume!(!leaves.is_empty());
        let targets: Vec<FieldPath> = picks.iter().map(|i| i.get(&leaves).clone()).collect();
        let template = generate_template(&graph, &TargetSet::new(ClauseKind::Mta, targets).unwrap()).unwrap();
        prop_assert_eq!(validate_against_schema(&template.skeleton, &graph, ValidationMode::Template), vec![], "{}", text);
        let filled = common::fill(&template, &graph, &mut rng);
        let report = check_conformance(&filled, &graph, &template);
        prop_assert!(report.passed(), "{}\n{}\n{:?}", text, filled, report.violations);
    }

    #[test]
    fn auto_score_matches_exhaustive_oracle(
        doc in 0..60usize,
        clause in clause(),
        seed in any::<u64>(),
        ops in prop::collection::vec(
            prop::sample::select(vec![Mutation::EditLeaf, Mutation::DeleteEntry, Mutation::Permute, Mutation::DuplicateEntry]),
            0..4,
        ),
    ) {
        let graph = fixtures::cdm_schema();
        let doc = &fixture_corpus().docs()[doc];
        prop_assume!(doc.applies(clause));
        let truth = doc.truth(clause).unwrap();
        let generated = common::mutate(truth, &ops, &mut common::rng(seed));
        let expected = common::oracle_score(&generated, truth, &graph);
        prop_assert_eq!(auto_score(&generated, truth, &graph), expected);
        // Swapping roles is a different question but must agree with the oracle too.
        prop_assert_eq!(auto_score(truth, &generated, &graph), common::oracle_score(truth, &generated, &graph));
        if ops.iter().all(|op| *op == Mutation::Permute) {
            prop_assert_eq!(expected, 100.0);
        }
    }

    #[test]
    fn breakdown_accounts_for_every_truth_leaf(doc in 0..60usize, clause in clause(), seed in any::<u64>()) {
        let graph = fixtures::cdm_schema();
        let doc = &fixture_corpus().docs()[doc];
        prop_assume!(doc.applies(clause));
        let truth = doc.truth(clause).unwrap();
        let ops = [Mutation::EditLeaf, Mutation::DeleteEntry];
        let generated = common::mutate(truth, &ops, &mut common::rng(seed));
        let b = score_breakdown(&generated, truth, &graph);
        prop_assume!(b.diagnostics.is_empty());
        prop_assert_eq!(b.matched + b.mismatched.len() + b.missing.len(), b.truth_leaves);
    }

    #[test]
    fn normalize_is_idempotent(doc in 0..60usize, clause in clause(), seed in any::<u64>()) {
        let graph = fixtures::cdm_schema();
        let doc = &fixture_corpus().docs()[doc];
        prop_assume!(doc.applies(clause));
        let mut value = common::mutate(doc.truth(clause).unwrap(), &[Mutation::EditLeaf], &mut common::rng(seed));
        // Messy spellings the normalizer is meant to absorb.
        let text = value.to_string().replace("\"USD\"", "\" usd \"").replace("PARTY_1", "party-1");
        value = serde_json::from_str(&text).unwrap();
        let once = normalize(&value, &graph).value;
        prop_assert_eq!(normalize(&once, &graph).value, once);
    }

    #[test]
    fn identity_scores_100_and_empty_scores_0(doc in 0..60usize, clause in clause()) {
        let graph = fixtures::cdm_schema();
        let doc = &fixture_corpus().docs()[doc];
        prop_assume!(doc.applies(clause));
        let truth = doc.truth(clause).unwrap();
        prop_assert_eq!(auto_score(truth, truth, &graph), 100.0);
        prop_assert_eq!(auto_score(&json!({}), truth, &graph), 0.0);
    }
}

const VOCAB: &[&str] = &[
    "threshold", "rounding", "currency", "eligible", "minimum", "transfer", "amount", "party", "usd", "eur", "a", "x1",
];

fn small_corpus(texts: &[String], truth_mask: &[bool]) -> Corpus {
    let docs = texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let mut truth = BTreeMap::new();
            if truth_mask[i] {
                truth.insert(ClauseKind::Mta, json!({"i": i}));
            }
            ContractDoc { id: format!("d{i:02}"), text: text.clone(), ground_truth: truth }
        })
        .collect();
    Corpus::new(Manifest { name: "p".into(), source: String::new(), docs: vec![] }, docs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn retrieval_matches_brute_force_cosine(
        docs in prop::collection::vec(
            (prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 0..12), any::<bool>()),
            2..10,
        ),
        k in 1..5usize,
    ) {
        let texts: Vec<String> = docs.iter().map(|(words, _)| words.join(" ")).collect();
        let mask: Vec<bool> = docs.iter().map(|d| d.1).collect();
        let corpus = small_corpus(&texts, &mask);
        let index = build_index(&corpus).unwrap();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        for a in 0..texts.len() {
            let ida = format!("d{a:02}");
            for b in 0..texts.len() {
                let idb = format!("d{b:02}");
                let s = index.similarity(&ida, &idb).unwrap();
                prop_assert!((s - common::oracle_cosine(&refs, a, b)).abs() < 1e-9);
                prop_assert_eq!(s, index.similarity(&idb, &ida).unwrap());
                prop_assert!((0.0..=1.0).contains(&s));
            }
            let got = index.retrieve(&ida, ClauseKind::Mta, k).unwrap();
            let pool = mask.iter().enumerate().filter(|&(i, m)| *m && i != a).count();
            prop_assert_eq!(got.len(), k.min(pool));
            prop_assert!(got.iter().all(|e| e.doc_id != ida));
            prop_assert!(got.windows(2).all(|w| w[0].similarity > w[1].similarity
                || (w[0].similarity == w[1].similarity && w[0].doc_id < w[1].doc_id)));
        }
    }

    #[test]
    fn mock_pipeline_outputs_conform_for_any_corpus_seed(seed in any::<u64>()) {
        use cdmizer_core::llm::{convert_clause, ConversionContext, ConvertSettings, MockBackend, PromptSet};
        use cdmizer_core::template::{generate_all, TargetRegistry};
        let corpus = generate_corpus(GeneratorOptions { seed, ..GeneratorOptions::default() });
        let graph = fixtures::cdm_schema();
        let templates = generate_all(&graph, &TargetRegistry::builtin()).unwrap();
        let backend = MockBackend::ground_truth(&corpus);
        let index = build_index(&corpus).unwrap();
        let prompts = PromptSet::builtin();
        let ctx = ConversionContext {
            graph: &graph,
            templates: &templates,
            retriever: Some(&index),
            backend: &backend,
            prompts: &prompts,
            settings: ConvertSettings::default(),
        };
        let doc = &corpus.docs()[(seed % 60) as usize];
        for clause in ClauseKind::ALL.into_iter().filter(|c| doc.applies(*c)) {
            for mode in cdmizer_core::Mode::ALL {
                let out = convert_clause(doc, clause, mode, &ctx).unwrap();
                prop_assert!(out.conformance.passed(), "{:?}", out.conformance.violations);
                prop_assert_eq!(out.attempts, 1);
            }
        }
    }
}
