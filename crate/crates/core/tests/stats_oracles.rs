mod common;

use hdea::stats::{welch_t_test, wilcoxon_signed_rank, Alternative, TestMethod};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn wilcoxon_matches_enumeration_with_ties_and_zeros() {
    let mut r = common::rng(41);
    for case in 0..300 {
        let n = r.random_range(1..=10);
        let coarse = case % 2 == 0;
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            if coarse {
                r.random_range(0..4) as f64
            } else {
                r.random_range(-1.0..1.0)
            }
        };
        let xs: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let ys: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        for alt in [Alternative::TwoSided, Alternative::Greater, Alternative::Less] {
            let got = wilcoxon_signed_rank(&xs, &ys, alt).unwrap();
            let want = common::wilcoxon_enumeration_p(&xs, &ys, alt);
            assert!(
                (got.p_value - want).abs() <= 1e-12,
                "case {case} {alt:?}: {} vs {want}",
                got.p_value
            );
            assert_ne!(got.method, TestMethod::WilcoxonSignedRankNormal);
        }
    }
}

#[test]
fn welch_tracks_permutation_distribution() {
    let mut r = common::rng(5);
    for case in 0..5 {
        let shift = r.random_range(0.0..1.5);
        let xs: Vec<f64> = (0..10).map(|_| r.sample::<f64, _>(StandardNormal) + shift).collect();
        let ys: Vec<f64> = (0..10).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let p = welch_t_test(&xs, &ys, Alternative::TwoSided).unwrap().p_value;
        let perm = common::welch_permutation_p(&xs, &ys, 100_000, case);
        assert!((p - perm).abs() <= 0.03, "case {case}: welch {p} permutation {perm}");
    }
}

#[test]
fn welch_statistic_matches_direct_formula() {
    let xs = [1.2, 3.4, 2.2, 5.0, 4.1];
    let ys = [0.3, 1.1, 0.9, 2.5];
    let r = welch_t_test(&xs, &ys, Alternative::TwoSided).unwrap();
    assert!((r.statistic - common::welch_t(&xs, &ys)).abs() < 1e-12);
}
