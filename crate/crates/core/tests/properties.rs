mod common;

use common::*;
use proptest::prelude::*;
use qualm::oracle::{brute_force_optimum, sequence_edit_utility};
use qualm::pipeline::prepare;
use qualm::tree::{decode_suggestion, encode_suggestion};
use qualm::utility::build_hierarchical_edit_diagram;
use qualm::{parse_source, solve, Confidence, LanguageName, SolveOptions, TaskKind, UtilityConfig};

fn line(words: &[u8]) -> String {
    let names = ["a", "b", "c", "d"];
    let mut s: String = words.iter().map(|&w| names[w as usize]).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// On a single flat line the hierarchical diagram reduces to the plain
    /// token edit DP.
    #[test]
    fn flat_line_matches_edit_dp(
        proto in prop::collection::vec(0u8..4, 1..6),
        intent in prop::collection::vec(0u8..4, 0..6),
        alpha in prop::sample::select(vec![0.3, 0.5, 0.7]),
        beta in prop::sample::select(vec![0.3, 0.5, 0.7]),
        seed in any::<u64>(),
    ) {
        let aug = augmented(&line(&proto), LanguageName::Python, TaskKind::Regions);
        let g = parse_source(&line(&intent), LanguageName::Python);
        let config = UtilityConfig::per_token(alpha, beta);
        let d = build_hierarchical_edit_diagram(&aug, &g, &config).unwrap();
        let a = random_feasible(&mut rng(seed), &aug);
        let s = decode_suggestion(&aug, &a).unwrap();
        let annotated: Vec<(String, Confidence)> = s.tokens.iter().map(|t| (t.lexeme.clone(), t.confidence)).collect();
        let intent_tokens: Vec<String> = g.tokens().iter().map(|t| t.lexeme.clone()).collect();
        let want = sequence_edit_utility(&intent_tokens, &annotated, alpha, beta);
        let got = d.best_path_value(&a.to_partial());
        prop_assert!((got - want).abs() < 1e-9, "diagram {got} vs DP {want}");
    }

    #[test]
    fn feasible_assignments_round_trip(seed in any::<u64>(), task in prop::sample::select(TASKS.to_vec())) {
        let mut r = rng(seed);
        let record = python_record(&mut r, "p", 3, 1);
        let prep = prepare(&record, task, &UtilityConfig::default()).unwrap();
        let a = random_feasible(&mut r, &prep.prototype);
        let s = decode_suggestion(&prep.prototype, &a).unwrap();
        prop_assert_eq!(encode_suggestion(&prep.prototype, &s).unwrap(), a);
    }

    #[test]
    fn solver_is_sandwiched(seed in any::<u64>(), i in 0usize..2) {
        let sys = small_system(&mut rng(seed), i);
        let rep = solve(&sys, SolveOptions::default()).unwrap();
        let best = brute_force_optimum(&sys).unwrap().best_value;
        prop_assert!(rep.primal_value <= best + 1e-9);
        prop_assert!(best <= rep.dual_bound + 1e-9);
        prop_assert!(rep.dual_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        if rep.duality_gap < 1e-9 {
            prop_assert!((rep.primal_value - best).abs() < 1e-9);
        }
    }
}
