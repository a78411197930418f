//! Property tests for the pure kernels: output rendering and parsing,
//! panel agreement, reward scoring, screening escalation, citation
//! normalization, bootstrap intervals, and the fallback embedder.

use proptest::prelude::*;

use verikit::bench::bootstrap_ci;
use verikit::citeaudit::{normalize_citation, CitationStyle};
use verikit::corpus::hashed_bow_embed;
use verikit::reward::reward;
use verikit::synthgen::{consensus, screen_controversial, ConsensusResult};
use verikit::verdict::{
    coarse_label, parse_verification_output, LikertScore, VerificationReport,
};

/// Regression: Unicode decimal digits (here Nag Mundari, U+1E4F0..) must
/// not be extracted as identifier digits — a "normalized" PMID built from
/// them could never parse as an integer id downstream.
#[test]
fn identifier_extraction_accepts_ascii_digits_only() {
    assert!(normalize_citation("pmID\u{1E4F0}", CitationStyle::Pmid).is_err());
    assert!(
        normalize_citation("PMID \u{1E4F1}\u{1E4F2}\u{1E4F3}123456", CitationStyle::Pmid)
            .is_err(),
        "a digit run glued to Unicode digits has no word boundary"
    );
    assert_eq!(
        normalize_citation("PMID: 123456", CitationStyle::Pmid).ok().as_deref(),
        Some("123456")
    );
}

fn likert() -> impl Strategy<Value = LikertScore> {
    (-2i64..=2).prop_map(|v| LikertScore::new(v).expect("in range"))
}

/// Rationale prose without leading/trailing whitespace. The character set
/// has no `/`, so the one forbidden substring (`</think>`) cannot occur,
/// while other tag-like fragments (`<score>`, `<think>`) remain possible
/// and must survive a round trip as plain prose.
fn rationale() -> impl Strategy<Value = String> {
    proptest::string::string_regex(
        "[A-Za-z0-9](?:[A-Za-z0-9 ,.;:!?()<>\\[\\]{}'\"-]{0,100}[A-Za-z0-9.!?)\"])?",
    )
    .expect("valid generator")
}

proptest! {
    #[test]
    fn rendering_then_parsing_returns_the_identical_report(
        text in rationale(),
        score in likert(),
    ) {
        let report = VerificationReport::new(text, score).expect("valid report");
        let parsed = parse_verification_output(&report.render()).expect("round trip parses");
        prop_assert_eq!(parsed, report);
    }

    #[test]
    fn parsing_arbitrary_text_never_panics_and_accepts_only_round_trippable_output(
        raw in any::<String>(),
    ) {
        if let Ok(report) = parse_verification_output(&raw) {
            // Whatever was accepted must itself survive a round trip.
            let again = parse_verification_output(&report.render()).expect("round trip parses");
            prop_assert_eq!(again, report);
        }
    }

    #[test]
    fn panel_agreement_is_permutation_invariant_and_matches_the_vote_oracle(
        a in likert(),
        b in likert(),
        c in likert(),
    ) {
        let scores = [a, b, c];
        // Independent statement of the rule: some score value occurs at
        // least twice and every panel member is within one point of it.
        let oracle = scores
            .iter()
            .find(|candidate| {
                scores.iter().filter(|s| s == candidate).count() >= 2
                    && scores.iter().all(|s| s.distance(**candidate) <= 1)
            })
            .map(|winner| ConsensusResult::Agreed(*winner))
            .unwrap_or(ConsensusResult::NoConsensus);

        let orders: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            let permuted = [scores[order[0]], scores[order[1]], scores[order[2]]];
            prop_assert_eq!(consensus(permuted), oracle, "order {:?}", order);
        }
    }

    #[test]
    fn reward_of_any_text_lands_on_the_five_value_ladder(
        raw in any::<String>(),
        gold in likert(),
    ) {
        let value = reward(&raw, gold).value();
        prop_assert!(
            [-1.0, -0.5, 0.0, 0.5, 1.0].contains(&value),
            "unexpected reward {value}"
        );
    }

    #[test]
    fn reward_of_well_formed_output_is_half_of_two_minus_the_distance(
        text in rationale(),
        predicted in likert(),
        gold in likert(),
    ) {
        let rendered = VerificationReport::new(text, predicted)
            .expect("valid report")
            .render();
        let expected = 0.5 * (2.0 - f64::from(predicted.distance(gold)));
        prop_assert_eq!(reward(&rendered, gold).value(), expected);
    }

    #[test]
    fn screening_escalates_exactly_the_multi_class_verdict_sets(
        scores in proptest::collection::vec(likert(), 1..=8),
    ) {
        let spans_classes = scores
            .iter()
            .any(|s| coarse_label(*s) != coarse_label(scores[0]));
        prop_assert_eq!(
            screen_controversial(&scores).expect("nonempty list"),
            spans_classes
        );
    }

    #[test]
    fn normalization_is_idempotent_for_every_style(
        input in prop_oneof![
            any::<String>(),
            proptest::string::string_regex(r"(?i)PMID[\s:.#]{0,3}\d{1,9}").unwrap(),
            proptest::string::string_regex(
                r"(doi:)?10\.\d{4,9}/[A-Za-z0-9./()\[\]<>;:-]{1,30}[.,;]?"
            ).unwrap(),
            proptest::string::string_regex(r"\[?\d{1,3}[.)\]] [A-Za-z ,.;\d()-]{5,60}").unwrap(),
            proptest::string::string_regex(r"[A-Za-z ,.;\d()/:-]{0,80}").unwrap(),
        ],
        style in proptest::sample::select(&CitationStyle::ALL[..]),
    ) {
        if let Ok(normalized) = normalize_citation(&input, style) {
            let again = normalize_citation(&normalized, style);
            prop_assert_eq!(
                again.as_deref().ok(),
                Some(normalized.as_str()),
                "renormalizing must be a fixpoint (style {:?}, input {:?})",
                style,
                input
            );
        }
    }

    #[test]
    fn bootstrap_interval_is_ordered_inside_the_sample_range_and_seeded(
        values in proptest::collection::vec((0..=1000u32).prop_map(|v| f64::from(v) / 1000.0), 1..=25),
        iterations in 1..=300u64,
        level in 0.5..0.99f64,
        seed in any::<u64>(),
    ) {
        let (lo, hi) = bootstrap_ci(&values, iterations, level, seed).expect("valid inputs");
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= hi, "interval flipped: ({lo}, {hi})");
        prop_assert!(lo >= min - 1e-9, "low end {lo} below sample minimum {min}");
        prop_assert!(hi <= max + 1e-9, "high end {hi} above sample maximum {max}");

        let (lo2, hi2) = bootstrap_ci(&values, iterations, level, seed).expect("valid inputs");
        prop_assert_eq!(lo.to_bits(), lo2.to_bits(), "same seed must reproduce bit-for-bit");
        prop_assert_eq!(hi.to_bits(), hi2.to_bits(), "same seed must reproduce bit-for-bit");
    }

    #[test]
    fn fallback_embedding_is_unit_length_and_deterministic(
        text in proptest::string::string_regex("[a-zA-Z0-9][a-zA-Z0-9 ]{0,59}").unwrap(),
        dim in 1..=64usize,
    ) {
        let vector = hashed_bow_embed(&text, dim).expect("tokenizable text");
        prop_assert_eq!(vector.len(), dim);
        let norm: f64 = vector.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-4, "norm {norm} is not unit");

        let again = hashed_bow_embed(&text, dim).expect("tokenizable text");
        let bitwise_equal = vector
            .iter()
            .zip(again.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        prop_assert!(bitwise_equal, "same text and dim must embed identically");
    }
}
