use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semctx::lexical::{sim_const, sim_const_raw, sim_lcs, sim_lcu, LexicalConfig, LexicalKernel};
use semctx::linalg::{min_eigenvalue, Matrix};

/// Equal substring occurrence pairs, counted one by one.
fn shared_substrings(a: &str, b: &str) -> u64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut n = 0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                n += 1;
                k += 1;
            }
        }
    }
    n
}

fn word() -> impl Strategy<Value = String> {
    "[a-cA-C]{1,12}"
}

proptest! {
    #[test]
    fn measures_are_symmetric_and_bounded(a in word(), b in word()) {
        for f in [sim_lcs, sim_lcu] {
            let (x, y) = (f(&a, &b), f(&b, &a));
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x));
        }
        let c = sim_const(&a, &b).unwrap();
        prop_assert!((c - sim_const(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn self_similarity_is_one(a in word()) {
        prop_assert_eq!(sim_lcs(&a, &a), 1.0);
        prop_assert_eq!(sim_lcu(&a, &a), 1.0);
        prop_assert!((sim_const(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn suffix_statistics_match_enumeration(a in "[ab]{0,30}", b in "[ab]{0,30}") {
        prop_assert_eq!(sim_const_raw(&a, &b), shared_substrings(&a.to_lowercase(), &b.to_lowercase()));
    }
}

#[test]
fn tables_on_random_identifier_sets_are_psd() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = r.gen_range(2..=8);
        let words: Vec<String> = (0..n)
            .map(|_| {
                let len = r.gen_range(1..=7);
                (0..len).map(|_| *b"abcAB".choose(&mut r).unwrap() as char).collect()
            })
            .collect();
        for kernel in [LexicalKernel::Lcs, LexicalKernel::Lcu, LexicalKernel::Const] {
            for case_sensitive in [false, true] {
                let cfg = LexicalConfig { case_sensitive, ..LexicalConfig::with_kernel(kernel) };
                let m = Matrix::from_fn(n, n, |i, j| cfg.sim(&words[i], &words[j]));
                assert!(min_eigenvalue(&m) >= -1e-8, "{:?} on {:?}", kernel, words);
            }
        }
    }
}

#[test]
fn case_flag_changes_matching() {
    let folded = LexicalConfig::with_kernel(LexicalKernel::Lcs);
    let exact = LexicalConfig { case_sensitive: true, ..folded };
    assert_eq!(folded.sim("carOwner", "carModel"), 25.0 / 64.0);
    assert_eq!(exact.sim("carOwner", "carModel"), 16.0 / 64.0);
    assert_eq!(folded.sim("", "car"), 0.0);
    assert!(sim_const("", "car").is_err());
}
