mod common;

use common::{
    all_trees, brute_best_where, brute_marginal, close, ranked_labelings, ranked_trees, ChainTable,
    EdgeTable,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structconf::chain::{
    constrained_best_score, forward_backward_marginals, kbest_viterbi, viterbi, LabelConstraint,
};
use structconf::tree::{
    cle_decode, constrained_cle, kbest_arborescences, EdgeWeightMatrix, HeadConstraint,
};
use structconf::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn viterbi_matches_enumeration_n5_l3() {
    for seed in 0..20 {
        let t = ChainTable::random(&mut rng(seed), 5, 3);
        let (y, s) = viterbi(&t.to_potentials());
        let best = &ranked_labelings(&t)[0];
        assert_eq!(y, best.0);
        assert!(close(s, best.1, 1e-9));
    }
}

#[test]
fn viterbi_ties_pick_the_lexicographically_smallest_labeling() {
    for seed in 0..50 {
        let t = ChainTable::random_integer(&mut rng(seed), 4, 3);
        let (y, _) = viterbi(&t.to_potentials());
        assert_eq!(y, ranked_labelings(&t)[0].0, "seed {seed}");
    }
}

#[test]
fn kbest_matches_top_ten_n4_l3() {
    for seed in 0..20 {
        let t = ChainTable::random(&mut rng(100 + seed), 4, 3);
        let got = kbest_viterbi(&t.to_potentials(), 10);
        let want = &ranked_labelings(&t)[..10];
        assert_eq!(got.len(), 10);
        for ((gy, gs), (wy, ws)) in got.iter().zip(want) {
            assert_eq!(gy, wy);
            assert!(close(*gs, *ws, 1e-9));
        }
    }
}

#[test]
fn kbest_with_ties_follows_lexicographic_order() {
    for seed in 0..50 {
        let t = ChainTable::random_integer(&mut rng(200 + seed), 3, 3);
        let got: Vec<Vec<usize>> = kbest_viterbi(&t.to_potentials(), 12)
            .into_iter()
            .map(|e| e.0)
            .collect();
        let want: Vec<Vec<usize>> = ranked_labelings(&t)
            .into_iter()
            .take(12)
            .map(|e| e.0)
            .collect();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn kbest_exhaustive_returns_everything() {
    let t = ChainTable::random(&mut rng(7), 3, 2);
    let got = kbest_viterbi(&t.to_potentials(), 100);
    assert_eq!(got.len(), 8);
    let want = ranked_labelings(&t);
    assert!(got.iter().zip(&want).all(|(g, w)| g.0 == w.0));
}

#[test]
fn marginals_match_enumeration_n4_l3() {
    for seed in 0..10 {
        let t = ChainTable::random(&mut rng(300 + seed), 4, 3);
        let m = forward_backward_marginals(&t.to_potentials(), 0.7).unwrap();
        for p in 0..4 {
            for y in 0..3 {
                assert!(close(m.get(p, y), brute_marginal(&t, 0.7, p, y), 1e-9));
            }
        }
    }
}

#[test]
fn high_temperature_concentrates_on_viterbi() {
    let mut t = ChainTable::random(&mut rng(11), 5, 3);
    // Separate the table so the best labeling wins by a wide margin.
    let (best, _) = viterbi(&t.to_potentials());
    for (p, &y) in best.iter().enumerate() {
        t.node[p][y] += 3.0;
    }
    let m = forward_backward_marginals(&t.to_potentials(), 100.0).unwrap();
    for (p, &y) in best.iter().enumerate() {
        assert!(m.get(p, y) > 1.0 - 1e-9);
    }
}

#[test]
fn constrained_scores_match_enumeration_n5_l3() {
    for seed in 0..10 {
        let t = ChainTable::random(&mut rng(400 + seed), 5, 3);
        let table = t.to_potentials();
        for p in 0..5 {
            for y in 0..3 {
                let forced = constrained_best_score(&table, p, LabelConstraint::Force(y)).unwrap();
                let forbid = constrained_best_score(&table, p, LabelConstraint::Forbid(y)).unwrap();
                assert!(close(
                    forced,
                    brute_best_where(&t, |z| z[p] == y).unwrap(),
                    1e-9
                ));
                assert!(close(
                    forbid,
                    brute_best_where(&t, |z| z[p] != y).unwrap(),
                    1e-9
                ));
            }
        }
    }
}

#[test]
fn forbidding_the_only_label_is_infeasible() {
    let t = ChainTable::random(&mut rng(1), 3, 1);
    assert!(matches!(
        constrained_best_score(&t.to_potentials(), 1, LabelConstraint::Forbid(0)),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn cle_matches_enumeration_n4() {
    for seed in 0..30 {
        let t = EdgeTable::random(&mut rng(500 + seed), 4, 0.0);
        let tree = cle_decode(&t.to_matrix()).unwrap();
        let best = &ranked_trees(&t, |_| true)[0];
        assert_eq!(tree.heads, best.0);
        assert!(close(tree.score, best.1, 1e-9));
    }
}

#[test]
fn cle_two_word_tie_prefers_chain_through_word_one() {
    let mut w = EdgeWeightMatrix::forbidden(2);
    w.set(0, 1, 1.0);
    w.set(0, 2, 1.0);
    w.set(1, 2, 5.0);
    w.set(2, 1, 5.0);
    let tree = cle_decode(&w).unwrap();
    assert_eq!(tree.heads, vec![0, 1]);
    assert_eq!(tree.score, 6.0);
}

#[test]
fn constrained_cle_matches_enumeration_n4() {
    for seed in 0..10 {
        let t = EdgeTable::random(&mut rng(600 + seed), 4, 0.0);
        let w = t.to_matrix();
        for d in 1..=4 {
            for h in (0..=4).filter(|&h| h != d) {
                for (constraint, keep) in [
                    (
                        HeadConstraint::Force(h),
                        Box::new(move |z: &[usize]| z[d - 1] == h) as Box<dyn Fn(&[usize]) -> bool>,
                    ),
                    (
                        HeadConstraint::Forbid(h),
                        Box::new(move |z: &[usize]| z[d - 1] != h),
                    ),
                ] {
                    let want = ranked_trees(&t, &keep);
                    match constrained_cle(&w, d, constraint) {
                        Ok(tree) => {
                            assert!(close(tree.score, want[0].1, 1e-9));
                            assert!(keep(&tree.heads));
                        }
                        Err(Error::NoTree) => assert!(want.is_empty()),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }
}

#[test]
fn kbest_trees_match_top_eight_n4() {
    for seed in 0..20 {
        let t = EdgeTable::random(&mut rng(700 + seed), 4, 0.0);
        let got = kbest_arborescences(&t.to_matrix(), 8);
        let want = &ranked_trees(&t, |_| true)[..8];
        for (g, (heads, score)) in got.iter().zip(want) {
            assert_eq!(&g.heads, heads);
            assert!(close(g.score, *score, 1e-9));
        }
    }
}

#[test]
fn two_words_have_two_trees() {
    assert_eq!(all_trees(2).len(), 2);
    let t = EdgeTable::random(&mut rng(3), 2, 0.0);
    let got = kbest_arborescences(&t.to_matrix(), 5);
    assert_eq!(got.len(), 2);
    assert_ne!(got[0].heads, got[1].heads);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginal_rows_sum_to_one(seed in any::<u64>(), n in 1usize..7, l in 1usize..5, c in 0.05f64..5.0) {
        let t = ChainTable::random(&mut rng(seed), n, l);
        let m = forward_backward_marginals(&t.to_potentials(), c).unwrap();
        for p in 0..n {
            let sum: f64 = (0..l).map(|y| m.get(p, y)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kbest_is_sorted_distinct_and_starts_with_viterbi(seed in any::<u64>(), n in 1usize..6, l in 1usize..4, k in 1usize..15) {
        let t = ChainTable::random(&mut rng(seed), n, l);
        let table = t.to_potentials();
        let got = kbest_viterbi(&table, k);
        prop_assert_eq!(got.len(), k.min(l.pow(n as u32)));
        prop_assert_eq!(&got[0].0, &viterbi(&table).0);
        for pair in got.windows(2) {
            prop_assert!(pair[0].1 >= pair[1].1);
            prop_assert_ne!(&pair[0].0, &pair[1].0);
        }
        for (y, s) in &got {
            prop_assert!((t.score(y) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn kbest_trees_are_valid_and_sorted(seed in any::<u64>(), n in 1usize..6, k in 1usize..10) {
        let t = EdgeTable::random(&mut rng(seed), n, 0.2);
        let got = kbest_arborescences(&t.to_matrix(), k);
        for pair in got.windows(2) {
            prop_assert!(pair[0].score >= pair[1].score);
            prop_assert_ne!(&pair[0].heads, &pair[1].heads);
        }
        for tree in &got {
            prop_assert!(common::is_single_root_tree(&tree.heads));
            prop_assert!((t.score(&tree.heads).unwrap() - tree.score).abs() < 1e-9);
        }
    }
}
