mod common;

use common::{check_extraction_invariants, check_golden, fuzz_inputs, golden_cases, window_of};
use llmhar_core::extract::{extract_predictions, split_reasoning};
use proptest::prelude::*;

#[test]
fn golden_completions() {
    let cases = golden_cases();
    assert_eq!(cases.len(), 20);
    let failures: Vec<String> = cases.iter().filter_map(|c| check_golden(c).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn fragment_fuzz_never_panics() {
    for raw in fuzz_inputs(10_000, 0xfeed) {
        if let Err(e) = check_extraction_invariants(&raw) {
            panic!("{e} for input {raw:?}");
        }
    }
}

#[test]
fn huge_unbalanced_input() {
    let raw = "[".repeat(5_000) + &"{\"id\":1,".repeat(500);
    check_extraction_invariants(&raw).unwrap();
}

#[test]
fn reasoning_is_captured() {
    let (trace, answer) = split_reasoning("<think>\n  step one\n</think>\n[]");
    assert_eq!(trace, "step one");
    assert_eq!(answer, "\n[]");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_text_is_safe(raw in any::<String>()) {
        prop_assert!(check_extraction_invariants(&raw).is_ok());
    }

    #[test]
    fn answer_survives_surrounding_prose(
        labels in proptest::collection::vec(proptest::option::of(1u32..=4), 10),
        before in "[a-zA-Z .,:\n]{0,40}",
        after in "[a-zA-Z .,:\n]{0,40}",
    ) {
        let items: Vec<serde_json::Value> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| serde_json::json!({"id": i, "activity": format!("{l}. activity {l}")})))
            .collect();
        let raw = format!("<think>draft</think>{before}{}{after}", serde_json::to_string(&items).unwrap());
        let w = window_of("p", 0, &(0..10).collect::<Vec<_>>(), &[1; 10]);
        let preds = extract_predictions(&raw, &w);
        let expected: Vec<u64> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_some())
            .map(|(i, _)| i as u64)
            .collect();
        prop_assert_eq!(preds.iter().map(|p| p.event_id).collect::<Vec<_>>(), expected);
    }
}
