mod common;

use common::{
    brute_best_where, brute_marginal, close, ranked_labelings, ranked_trees, ChainTable, EdgeTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use structconf::chain::kbest_viterbi;
use structconf::confidence::{
    agreement_confidence, annotate_batch, build_alternatives_kbest, build_alternatives_sampled,
    conf_combo, conf_delta, conf_gamma, ConfidenceConfig, ConfidenceEstimator, Method,
    SamplingMode,
};
use structconf::{ChainInstance, Error, LinearModel, SparseVector, Structured, Transitions};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn model_with(weights: Vec<f64>) -> LinearModel {
    let n = weights.len();
    LinearModel::from_parts(weights.clone(), Some(vec![1.0; n]), weights, 1).unwrap()
}

fn random_chain(seed: u64, n: usize, l: usize) -> (ChainTable, ChainInstance, Vec<f64>) {
    let mut r = rng(seed);
    let t = ChainTable::random(&mut r, n, l);
    let gold = (0..n).map(|_| r.random_range(0..l)).collect();
    let (x, w) = t.to_instance(gold);
    (t, x, w)
}

#[test]
fn margin_example() {
    let t = ChainTable {
        node: vec![vec![17.8, 12.2]],
        trans: vec![],
    };
    let (x, w) = t.to_instance(vec![0]);
    let (pred, delta) = conf_delta(&x, &w).unwrap();
    assert_eq!(pred, vec![0]);
    assert!((delta[0] - 5.6).abs() < 1e-9);
}

#[test]
fn margins_match_constrained_enumeration() {
    for seed in 0..10 {
        let (t, x, w) = random_chain(seed, 5, 3);
        let (pred, delta) = conf_delta(&x, &w).unwrap();
        let best = ranked_labelings(&t)[0].1;
        for p in 0..5 {
            let alt = brute_best_where(&t, |z| z[p] != pred[p]).unwrap();
            assert!(close(delta[p], best - alt, 1e-9));
        }
    }
}

#[test]
fn zero_weights_give_zero_margins_and_single_labels_give_infinity() {
    let (_, x, w) = random_chain(1, 4, 3);
    let (_, delta) = conf_delta(&x, &vec![0.0; w.len()]).unwrap();
    assert!(delta.iter().all(|&d| d == 0.0));
    let (_, x1, w1) = random_chain(2, 3, 1);
    let (_, delta) = conf_delta(&x1, &w1).unwrap();
    assert!(delta.iter().all(|d| d.is_infinite() && *d > 0.0));
}

#[test]
fn tree_margins_match_enumeration() {
    for seed in 0..10 {
        let t = EdgeTable::random(&mut rng(50 + seed), 4, 0.0);
        let gold = ranked_trees(&t, |_| true).last().unwrap().0.clone();
        let (x, w) = t.to_instance(gold);
        let (pred, delta) = conf_delta(&x, &w).unwrap();
        let best = ranked_trees(&t, |_| true)[0].clone();
        assert_eq!(pred, best.0);
        for d in 1..=4 {
            let alt = ranked_trees(&t, |h| h[d - 1] != pred[d - 1])[0].1;
            assert!(close(delta[d - 1], best.1 - alt, 1e-9));
        }
    }
}

#[test]
fn gamma_matches_enumeration_marginals() {
    for seed in 0..10 {
        let (t, x, w) = random_chain(100 + seed, 4, 3);
        let (pred, nu) = conf_gamma(&x, &w, 0.7).unwrap();
        for p in 0..4 {
            assert!(close(nu[p], brute_marginal(&t, 0.7, p, pred[p]), 1e-9));
        }
    }
    let flat = ChainTable {
        node: vec![vec![0.0, 0.0]],
        trans: vec![],
    };
    let (x, w) = flat.to_instance(vec![0]);
    assert!((conf_gamma(&x, &w, 1.0).unwrap().1[0] - 0.5).abs() < 1e-12);
}

#[test]
fn gamma_is_unsupported_for_trees() {
    let t = EdgeTable::random(&mut rng(3), 3, 0.0);
    let (x, w) = t.to_instance(vec![0, 1, 1]);
    assert!(matches!(
        conf_gamma(&x, &w, 1.0),
        Err(Error::UnsupportedMethod(_))
    ));
}

#[test]
fn kbest_alternatives_follow_the_decoder() {
    for seed in 0..10 {
        let (t, x, w) = random_chain(200 + seed, 4, 3);
        let alts = build_alternatives_kbest(&x, &w, 5, false).unwrap();
        let want = kbest_viterbi(&t.to_potentials(), 5);
        assert_eq!(
            alts.outputs,
            want.into_iter().map(|e| e.0).collect::<Vec<_>>()
        );
        assert!(alts.weights.iter().all(|&v| v == 1.0));
    }
    let one =
        build_alternatives_kbest(&random_chain(9, 3, 3).1, &random_chain(9, 3, 3).2, 1, false)
            .unwrap();
    assert_eq!(one.weights, vec![1.0]);
}

#[test]
fn weighted_alternatives_clip_at_zero() {
    let t = ChainTable {
        node: vec![vec![2.0, 1.0, -1.0]],
        trans: vec![],
    };
    let (x, w) = t.to_instance(vec![0]);
    let alts = build_alternatives_kbest(&x, &w, 3, true).unwrap();
    assert_eq!(alts.weights, vec![2.0, 1.0, 0.0]);
    assert_eq!(agreement_confidence(&alts, &[0]).unwrap(), vec![2.0 / 3.0]);
}

#[test]
fn tiny_scale_sampling_reproduces_the_prediction() {
    let (_, x, w) = random_chain(300, 6, 3);
    let model = model_with(w.clone());
    let (pred, _) = x.decode(&w).unwrap();
    for mode in [SamplingMode::Fixed, SamplingMode::PerCoordinate] {
        let alts = build_alternatives_sampled(&x, &model, true, 20, 1e-12, mode, 4, 0).unwrap();
        assert!(alts.outputs.iter().all(|z| *z == pred));
    }
    let cfg = ConfidenceConfig {
        s: 1e-12,
        ..ConfidenceConfig::with_method(Method::KdFix)
    };
    let ann = ConfidenceEstimator::new(&model, &cfg)
        .unwrap()
        .annotate(&x, 0)
        .unwrap();
    assert!(ann.iter().all(|a| a.nu == 1.0));
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let (_, x, w) = random_chain(301, 6, 3);
    let model = model_with(w);
    let draw = |seed| {
        build_alternatives_sampled(&x, &model, true, 30, 4.0, SamplingMode::Fixed, seed, 7).unwrap()
    };
    assert_eq!(draw(1), draw(1));
    assert_ne!(draw(1), draw(2));
}

#[test]
fn per_coordinate_sampling_requires_covariance() {
    let (_, x, w) = random_chain(302, 3, 2);
    let model = LinearModel::from_parts(w.clone(), None, w, 1).unwrap();
    assert!(matches!(
        build_alternatives_sampled(&x, &model, true, 2, 0.1, SamplingMode::PerCoordinate, 0, 0),
        Err(Error::Config(_))
    ));
}

#[test]
fn sampled_agreement_matches_gaussian_tail() {
    // One position, two labels; label 1 fires feature 0 with mean weight m.
    // A draw w ~ N(m, s) decodes label 1 exactly when w > 0.
    let x = ChainInstance::new(
        2,
        vec![vec![SparseVector::new(), SparseVector::indicators([0])]],
        Transitions::PerPosition(Vec::new()),
        vec![1],
    )
    .unwrap();
    let (m, s, k) = (0.3, 0.25, 10_000usize);
    let model = model_with(vec![m]);
    let alts =
        build_alternatives_sampled(&x, &model, true, k, s, SamplingMode::Fixed, 42, 0).unwrap();
    let nu = agreement_confidence(&alts, &[1]).unwrap()[0];
    let p = 1.0 - Normal::new(m, f64::sqrt(s)).unwrap().cdf(0.0);
    let sigma = (p * (1.0 - p) / k as f64).sqrt();
    assert!(
        (nu - p).abs() <= 3.0 * sigma,
        "ν {nu} vs tail {p} (σ {sigma})"
    );
}

#[test]
fn combo_orders_lexicographically_by_sampling_then_margin() {
    for seed in 0..10 {
        let (_, x, w) = random_chain(400 + seed, 30, 3);
        let model = model_with(w);
        let cfg = ConfidenceConfig {
            s: 1.0,
            seed,
            ..ConfidenceConfig::with_method(Method::KdFix)
        };
        let kd: Vec<f64> = ConfidenceEstimator::new(&model, &cfg)
            .unwrap()
            .annotate(&x, 0)
            .unwrap()
            .into_iter()
            .map(|a| a.nu)
            .collect();
        let (_, delta) = conf_delta(&x, model.prediction_weights(true)).unwrap();
        let combo = conf_combo(&x, &model, &cfg).unwrap();
        for i in 0..kd.len() {
            for j in 0..kd.len() {
                let lex = kd[i].total_cmp(&kd[j]).then(delta[i].total_cmp(&delta[j]));
                assert_eq!(
                    combo[i].total_cmp(&combo[j]),
                    lex,
                    "seed {seed}: units {i}, {j}"
                );
            }
        }
    }
}

#[test]
fn estimator_outputs_respect_method_ranges() {
    let (_, x, w) = random_chain(500, 8, 3);
    let model = model_with(w);
    let xs = vec![x.clone(), x];
    for method in Method::ALL {
        let cfg = ConfidenceConfig {
            k: 10,
            ..ConfidenceConfig::with_method(method)
        };
        for ann in annotate_batch(&xs, &model, &cfg).unwrap().iter().flatten() {
            if method.is_absolute() {
                assert!((0.0..=1.0).contains(&ann.nu), "{method}: {}", ann.nu);
            } else {
                assert!(ann.nu >= 0.0);
            }
        }
    }
}

#[test]
fn kbest_with_one_alternative_is_certain() {
    let (_, x, w) = random_chain(501, 6, 3);
    let model = model_with(w);
    let cfg = ConfidenceConfig {
        k: 1,
        ..ConfidenceConfig::with_method(Method::Kb)
    };
    let ann = ConfidenceEstimator::new(&model, &cfg)
        .unwrap()
        .annotate(&x, 0)
        .unwrap();
    assert!(ann.iter().all(|a| a.nu == 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kd_scores_are_deterministic(seed in any::<u64>(), s in 0.01f64..3.0) {
        let (_, x, w) = random_chain(seed, 5, 3);
        let model = model_with(w);
        let cfg = ConfidenceConfig { s, k: 20, seed, ..ConfidenceConfig::with_method(Method::KdPc) };
        let a = ConfidenceEstimator::new(&model, &cfg).unwrap().annotate(&x, 3).unwrap();
        let b = ConfidenceEstimator::new(&model, &cfg).unwrap().annotate(&x, 3).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn agreement_is_a_weighted_fraction(seed in any::<u64>(), k in 1usize..20) {
        let (_, x, w) = random_chain(seed, 4, 3);
        let (pred, _) = x.decode(&w).unwrap();
        let alts = build_alternatives_kbest(&x, &w, k, false).unwrap();
        let nu = agreement_confidence(&alts, &pred).unwrap();
        for (p, v) in nu.iter().enumerate() {
            let count = alts.outputs.iter().filter(|z| z[p] == pred[p]).count();
            prop_assert!((v - count as f64 / alts.len() as f64).abs() < 1e-12);
        }
    }
}
