mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use common::{day, representation};
use outrel_core::ingest::inner_join_timestamps;
use outrel_core::scoring::{classify, cumulative_scores, dominant_scores};
use outrel_core::trend::omega;
use outrel_core::index::build_index;
use outrel_core::{ExclusionPolicy, Representation, Thresholds};

/// Closed form of the cumulative recurrence:
/// c_i = lambda^i u_0 + sum_{k=0}^{i-1} lambda^k (1 - lambda) u_{i-k}.
fn cumulative_closed_form(u: &[f64], lambda: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let mut c = lambda.powi(i as i32) * u[0];
            for k in 0..i {
                c += lambda.powi(k as i32) * (1.0 - lambda) * u[i - k];
            }
            c
        })
        .collect()
}

proptest! {
    #[test]
    fn cumulative_recurrence_matches_closed_form(
        u in prop::collection::vec(-6.0f64..6.0, 1..200),
        lambda_idx in 0usize..5,
    ) {
        let lambda = [0.0, 0.25, 0.5, 0.9, 1.0][lambda_idx];
        let rep = representation("x", u.iter().copied().enumerate().collect());
        let cum = cumulative_scores(&rep, lambda, None).unwrap();
        let expected = cumulative_closed_form(&u, lambda);
        for (got, want) in cum.scores.values().zip(&expected) {
            prop_assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }
    }

    #[test]
    fn join_length_is_key_intersection_size(
        keys_a in prop::collection::btree_set(0usize..60, 1..40),
        keys_b in prop::collection::btree_set(0usize..60, 1..40),
    ) {
        let a = representation("a", keys_a.iter().map(|&d| (d, 1.0)).collect());
        let b = representation("b", keys_b.iter().map(|&d| (d, 2.0)).collect());
        let joined = inner_join_timestamps(&a, &b);
        prop_assert_eq!(joined.len(), keys_a.intersection(&keys_b).count());
        for window in joined.windows(2) {
            prop_assert!(window[0].0 < window[1].0);
        }
    }

    #[test]
    fn dominant_magnitude_is_the_max_and_outliers_never_shrink(
        u in prop::collection::vec(-8.0f64..8.0, 1..100),
        lambda in 0.0f64..=1.0,
    ) {
        let initial = representation("x", u.iter().copied().enumerate().collect());
        let cumulative = cumulative_scores(&initial, lambda, None).unwrap();
        let dominant = dominant_scores(&initial, &cumulative).unwrap();

        for (ts, d) in &dominant.scores {
            let ui = initial.scores[ts];
            let ci = cumulative.scores[ts];
            prop_assert!((d.abs() - ui.abs().max(ci.abs())).abs() < 1e-15);
            if ui.abs() >= ci.abs() {
                prop_assert_eq!(*d, ui);
            } else {
                prop_assert_eq!(*d, ci);
            }
        }

        // With symmetric thresholds a kept cumulative score can only grow
        // the magnitude, so dominant outliers are a superset.
        let (initial_outliers, _) = classify(&initial);
        let (dominant_outliers, _) = classify(&dominant);
        prop_assert!(initial_outliers.is_subset(&dominant_outliers));
    }

    #[test]
    fn omega_stays_in_unit_interval(
        u in -10.0f64..10.0,
        alpha in 0.05f64..=1.0,
        theta in 1.0f64..5.0,
    ) {
        let thresholds = Thresholds::symmetric(theta).unwrap();
        let w = omega(u, &thresholds, alpha).unwrap();
        prop_assert!(w > 0.0 && w <= 1.0);
        if thresholds.is_outlier(u) {
            prop_assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn index_pairs_equal_brute_force(
        outlier_days in prop::collection::vec(
            prop::collection::btree_set(0usize..50, 0..8),
            2..30,
        ),
    ) {
        let reps: Vec<Representation> = outlier_days
            .iter()
            .enumerate()
            .map(|(i, days)| {
                let mut scores: Vec<(usize, f64)> = (0..50).map(|d| (d, 0.0)).collect();
                for &d in days {
                    scores[d].1 = 4.0;
                }
                representation(&format!("r{i:02}"), scores)
            })
            .collect();

        let index = build_index(reps.clone()).unwrap();
        let from_index: BTreeMap<(String, String), BTreeSet<_>> = index
            .candidate_pairs(ExclusionPolicy::None)
            .into_iter()
            .map(|p| ((p.rep_a, p.rep_b), p.shared_outlier_timestamps))
            .collect();

        // Quadratic scan over outlier-timestamp intersections.
        let mut brute = BTreeMap::new();
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let shared: BTreeSet<_> = outlier_days[i]
                    .intersection(&outlier_days[j])
                    .map(|&d| day(d))
                    .collect();
                if !shared.is_empty() {
                    brute.insert((reps[i].id(), reps[j].id()), shared);
                }
            }
        }
        prop_assert_eq!(from_index, brute);
    }
}

/// Under exchangeability of the overall errors, a random sub-multiset falls
/// below the bootstrapped level-p percentile about p% of the time.
#[test]
fn bounded_fraction_matches_percentile_level_under_exchangeability() {
    use outrel_core::meaningfulness::{bootstrap_percentile, PercentileRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut total_fraction = 0.0;
    let trials = 200;
    for t in 0..trials {
        let e_u: Vec<f64> = (0..120).map(|_| rng.gen_range(0.0f64..2.0).powi(2)).collect();
        let rho = bootstrap_percentile(&e_u, 95.0, 300, t as u64, PercentileRule::Linear)
            .unwrap()
            .estimate;
        // Exchangeable subset: sample 30 of the errors without replacement.
        let mut picks = e_u.clone();
        for i in 0..30 {
            let j = rng.gen_range(i..picks.len());
            picks.swap(i, j);
        }
        let bounded = picks[..30].iter().filter(|e| **e <= rho).count();
        total_fraction += bounded as f64 / 30.0;
    }
    let mean = total_fraction / trials as f64;
    assert!((mean - 0.95).abs() < 0.05, "mean bounded fraction {mean}");
}
