mod common;

use common::{case, oracle_extract, Case, ALLOWED};
use proptest::prelude::*;
use pvlens_core::matcher::{extract_from_text, group_terms, match_all_naive, MatchAutomaton};
use pvlens_core::SectionCategory;

fn extract(c: &Case, text: &str) -> Vec<pvlens_core::TermMatch> {
    let automaton = MatchAutomaton::build(&c.store).unwrap();
    let mut got = extract_from_text(
        text,
        SectionCategory::AdverseEvent,
        &automaton,
        &c.store,
        &c.stopword_list(),
        &Case::filter(),
    )
    .unwrap();
    got.sort();
    got
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_brute_force_oracle(c in case()) {
        let want = oracle_extract(&c.text, SectionCategory::AdverseEvent, &c.store, &c.stopwords, ALLOWED);
        prop_assert_eq!(extract(&c, &c.text), want);
    }

    #[test]
    fn kept_spans_are_aligned_and_never_nested(c in case()) {
        let got = extract(&c, &c.text);
        for m in &got {
            prop_assert_eq!(&c.text[m.span.start..m.span.end], m.surface.as_str());
            let before = c.text[..m.span.start].chars().last();
            let first = m.surface.chars().next().unwrap();
            prop_assert!(!(before.is_some_and(|b| b.is_alphanumeric() || b == '-') && (first.is_alphanumeric() || first == '-')));
            for n in &got {
                if m.span != n.span {
                    prop_assert!(!(m.span.contains(&n.span)), "{:?} contains {:?}", m.span, n.span);
                }
            }
        }
    }

    #[test]
    fn case_of_the_text_does_not_matter(c in case()) {
        // Only ASCII changes keep byte offsets fixed.
        let upper: String = c.text.chars().map(|ch| ch.to_ascii_uppercase()).collect();
        let spans = |ms: Vec<pvlens_core::TermMatch>| {
            let mut v: Vec<_> = ms.into_iter().map(|m| (m.span, m.concept_code)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(spans(extract(&c, &c.text)), spans(extract(&c, &upper)));
    }

    #[test]
    fn raw_scan_is_a_superset(c in case()) {
        let automaton = MatchAutomaton::build(&c.store).unwrap();
        let raw = automaton.find_all(&c.text);
        prop_assert_eq!(&raw, &match_all_naive(&c.text, &c.store));
        for m in extract(&c, &c.text) {
            prop_assert!(raw.iter().any(|r| r.span == m.span));
        }
    }

    #[test]
    fn grouping_keeps_every_mention(c in case()) {
        let got = extract(&c, &c.text);
        let grouped = group_terms(&got);
        prop_assert_eq!(grouped.iter().map(|g| g.mentions.len()).sum::<usize>(), got.len());
        for w in grouped.windows(2) {
            prop_assert!((w[0].category, &w[0].pt_code) < (w[1].category, &w[1].pt_code));
        }
    }
}

#[test]
fn two_builds_give_identical_output() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    for _ in 0..100 {
        let c = case().new_tree(&mut runner).unwrap().current();
        let a = MatchAutomaton::build(&c.store).unwrap();
        let b = MatchAutomaton::build(&c.store).unwrap();
        assert_eq!(a.find_all(&c.text), b.find_all(&c.text));
        assert_eq!(a.state_count(), b.state_count());
        assert_eq!(extract(&c, &c.text), extract(&c, &c.text));
    }
}
