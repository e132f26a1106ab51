mod common;

use common::{
    build_nfa, check_pair, label_id, random_probes, random_re, random_word, re_strategy, resolve,
    same_tables, PREDS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ring_rpq::glushkov::{Nfa, NfaOptions, TableLayout};
use ring_rpq::syntax::{parse_expr, reverse_expr};

#[test]
fn bit_parallel_matches_explicit_glushkov() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let m = rng.gen_range(1..=6);
        let e = random_re(&mut rng, m, PREDS);
        let word = random_word(&mut rng, &e);
        check_pair(&e, &word, &build_nfa(&e, TableLayout::Auto)).unwrap();
    }
}

#[test]
fn wide_automata_span_several_words() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let m = rng.gen_range(60..=140);
        let e = random_re(&mut rng, m, PREDS);
        let nfa = build_nfa(&e, TableLayout::Auto);
        assert!(nfa.words() >= 1 && nfa.table_chunks() > 1);
        for _ in 0..5 {
            let word = random_word(&mut rng, &e);
            check_pair(&e, &word, &nfa).unwrap();
        }
    }
}

#[test]
fn split_tables_equal_monolithic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..60 {
        let m = if i < 20 {
            rng.gen_range(12..=19)
        } else {
            rng.gen_range(1..=11)
        };
        let e = random_re(&mut rng, m, PREDS);
        let mono = build_nfa(&e, TableLayout::Split(m + 1));
        assert_eq!(mono.table_chunks(), 1);
        let probes = random_probes(&mut rng, m, 200);
        for d in [12, 5, 1] {
            let split = build_nfa(&e, TableLayout::Split(d));
            assert_eq!(split.table_chunks(), (m + 1).div_ceil(d));
            assert!(
                same_tables(&mono, &split, &probes),
                "{} split {d}",
                e.text()
            );
        }
    }
}

fn invert_word(w: &[(usize, bool)]) -> Vec<(usize, bool)> {
    w.iter().rev().map(|&(p, i)| (p, !i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reversal_accepts_inverted_words(e in re_strategy(PREDS, 8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let word = random_word(&mut rng, &e);
        let expr = parse_expr(&e.text()).unwrap();
        let rev = reverse_expr(&expr);
        prop_assert_eq!(rev.count_literals(), expr.count_literals());
        let fwd = Nfa::build(&expr, resolve, NfaOptions::default()).unwrap();
        let bwd = Nfa::build(&rev, resolve, NfaOptions::default()).unwrap();
        let ids = |w: &[(usize, bool)]| w.iter().map(|&a| label_id(a)).collect::<Vec<_>>();
        prop_assert_eq!(fwd.accepts(&ids(&word)), bwd.accepts(&ids(&invert_word(&word))));
        prop_assert_eq!(reverse_expr(&rev), expr);
    }

    #[test]
    fn rendered_expressions_parse_back(e in re_strategy(PREDS, 8)) {
        let expr = parse_expr(&e.text()).unwrap();
        prop_assert_eq!(expr.count_literals(), e.literals());
        prop_assert_eq!(parse_expr(&expr.to_string()).unwrap(), expr);
    }
}
