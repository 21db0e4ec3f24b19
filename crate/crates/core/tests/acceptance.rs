//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::Normal;

use common::{coincidence_pair, day, labeled_corpus, representation, trend_pair};
use outrel_core::index::build_index;
use outrel_core::pipeline::{
    discover_from_representations, evaluate, sensitivity_sweep, timing_report_from_representations,
    SweepGrids,
};
use outrel_core::scoring::{classify, cumulative_scores, dominant_scores};
use outrel_core::trend::{fit_wls, slope_test, AlignedPoint, AlignedSample, Direction};
use outrel_core::{ExclusionPolicy, PodsParams, Representation, Thresholds, Timestamp};

fn criterion(n: usize, pass: bool, detail: &str) {
    println!("[criterion {n:>2}] {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

// The compute-heavy criteria share one rayon pool; running them serially
// keeps the wall-clock measurements in criterion 8 meaningful at any
// --test-threads setting.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_slot() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(Normal::new(0.0, 1.0).unwrap())
}

/// 1. The cumulative recurrence matches its closed-form expansion on 100
///    random sequences within 1e-9, in under a second.
#[test]
fn acceptance_01_recurrence_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let lambdas = [0.0, 0.25, 0.5, 0.9, 1.0];
    let mut max_err: f64 = 0.0;
    for case in 0..100 {
        let len = rng.gen_range(1..=200);
        let u: Vec<f64> = (0..len).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let lambda = lambdas[case % lambdas.len()];
        let rep = representation("x", u.iter().copied().enumerate().collect());
        let cum = cumulative_scores(&rep, lambda, None).unwrap();

        for (i, got) in cum.scores.values().enumerate() {
            let mut want = lambda.powi(i as i32) * u[0];
            for k in 0..i {
                want += lambda.powi(k as i32) * (1.0 - lambda) * u[i - k];
            }
            max_err = max_err.max((got - want).abs());
        }
    }
    let elapsed = started.elapsed();
    criterion(
        1,
        max_err < 1e-9 && elapsed.as_secs_f64() < 1.0,
        &format!("max |recurrence - closed form| = {max_err:.2e} over 100 sequences in {elapsed:.2?}"),
    );
}

/// 2. Dominant scores never have fewer outliers than the initial scores.
#[test]
fn acceptance_02_dominance_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    for _ in 0..100 {
        let len = rng.gen_range(20..=200);
        let scale = rng.gen_range(0.5..2.5);
        let scores: Vec<(usize, f64)> =
            (0..len).map(|d| (d, std_normal(&mut rng) * scale)).collect();
        let lambda = rng.gen_range(0.0..=1.0);
        let initial = representation("x", scores);
        let cumulative = cumulative_scores(&initial, lambda, None).unwrap();
        let dominant = dominant_scores(&initial, &cumulative).unwrap();
        let (initial_outliers, _) = classify(&initial);
        let (dominant_outliers, _) = classify(&dominant);
        if dominant_outliers.len() < initial_outliers.len() {
            violations += 1;
        }
    }
    criterion(2, violations == 0, &format!("{violations} violations across 100 representations"));
}

/// 3. With alpha = 1 the weighted fit reproduces an independent ordinary
///    least-squares solve within 1e-9.
#[test]
fn acceptance_03_ols_reduction() {
    // Raw-moment OLS, deliberately a different route than the weighted
    // centered-moment fit under test.
    fn ols_oracle(points: &[(f64, f64)]) -> (f64, f64) {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        ((n * sxy - sx * sy) / (n * sxx - sx * sx), (sy - slope * sx) / n)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut max_diff: f64 = 0.0;
    for _ in 0..50 {
        let len = rng.gen_range(10..=80);
        let slope = rng.gen_range(-2.0..2.0);
        let pts: Vec<(f64, f64)> = (0..len)
            .map(|_| {
                let x = 2.0 * std_normal(&mut rng);
                (x, slope * x + std_normal(&mut rng))
            })
            .collect();
        let a = representation("a", pts.iter().map(|p| p.0).enumerate().collect());
        let b = representation("b", pts.iter().map(|p| p.1).enumerate().collect());
        let sample = AlignedSample::from_representations(&a, &b, 1.0).unwrap();
        let model = fit_wls(&sample, Direction::U2OnU1, 3).unwrap();
        let (slope_oracle, intercept_oracle) = ols_oracle(&pts);
        max_diff = max_diff
            .max((model.slope - slope_oracle).abs())
            .max((model.intercept - intercept_oracle).abs());
    }
    criterion(3, max_diff < 1e-9, &format!("max coefficient gap vs OLS oracle = {max_diff:.2e}"));
}

/// 4. The slope test rejects independent standard-normal pairs at the
///    nominal 5% level (within +/- 1%) over 10,000 seeded trials.
#[test]
fn acceptance_04_slope_test_calibration() {
    let n = 100;
    let trials = 10_000;
    let mut rejections = 0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(404_000 + seed);
        let points: Vec<AlignedPoint> = (0..n)
            .map(|i| AlignedPoint {
                timestamp: day(i),
                u1: std_normal(&mut rng),
                u2: std_normal(&mut rng),
            })
            .collect();
        let sample = AlignedSample {
            outlier_mask: vec![false; n],
            weights: vec![1.0; n],
            points,
        };
        let model = fit_wls(&sample, Direction::U2OnU1, 3).unwrap();
        if slope_test(&model, 0.05).reject {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    criterion(4, (rate - 0.05).abs() <= 0.01, &format!("rejection rate {rate:.4} over {trials} trials"));
}

/// 5. Candidate pairs from the index equal a quadratic brute-force scan on
///    50 random fixtures, and the detected set never depends on the index.
#[test]
fn acceptance_05_index_equivalence() {
    let _slot = heavy_slot();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let params = PodsParams { bootstrap_b: 200, ..Default::default() };
    let mut fixtures_checked = 0;
    for _ in 0..50 {
        let n_reps = rng.gen_range(5..=30);
        let reps: Vec<Representation> = (0..n_reps)
            .map(|i| {
                let scores: Vec<(usize, f64)> =
                    (0..50).map(|d| (d, 2.0 * std_normal(&mut rng))).collect();
                representation(&format!("r{i:02}"), scores)
            })
            .collect();

        // Index route vs quadratic intersection of outlier sets.
        let index = build_index(reps.clone()).unwrap();
        let from_index: BTreeMap<(String, String), BTreeSet<Timestamp>> = index
            .candidate_pairs(ExclusionPolicy::None)
            .into_iter()
            .map(|p| ((p.rep_a, p.rep_b), p.shared_outlier_timestamps))
            .collect();
        let mut brute = BTreeMap::new();
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let shared: BTreeSet<Timestamp> = reps[i]
                    .outlier_timestamps()
                    .intersection(&reps[j].outlier_timestamps())
                    .copied()
                    .collect();
                if !shared.is_empty() {
                    brute.insert((reps[i].id(), reps[j].id()), shared);
                }
            }
        }
        assert_eq!(from_index, brute, "index/derived pair mismatch");

        // Pruning soundness: identical meaningful sets with and without.
        let with = discover_from_representations(&reps, &params, true).unwrap();
        let without = discover_from_representations(&reps, &params, false).unwrap();
        let detected = |d: &outrel_core::pipeline::Discovery| {
            d.records
                .iter()
                .filter(|r| r.meaningful)
                .map(|r| (r.rep_a.clone(), r.rep_b.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(detected(&with), detected(&without), "detected set depends on index");
        fixtures_checked += 1;
    }
    criterion(5, fixtures_checked == 50, &format!("{fixtures_checked} fixtures, exact pair sets, index-invariant verdicts"));
}

/// 6. The constructed on-trend pair is reported meaningful, and its
///    off-trend variant not meaningful, in at least 95 of 100 seeds each,
///    within 30 seconds.
#[test]
fn acceptance_06_end_to_end_fixture() {
    let _slot = heavy_slot();
    let started = Instant::now();
    let planted = [30, 70, 110, 150, 190, 230];
    let params = PodsParams::default();
    let mut on_trend_hits = 0;
    let mut off_trend_hits = 0;
    for seed in 0..100 {
        let (a, b) = trend_pair(606_000 + seed, "w.t", "c.h", 260, &planted, 0);
        let d = discover_from_representations(&[a, b], &params, true).unwrap();
        if d.records.len() == 1 && d.records[0].meaningful {
            on_trend_hits += 1;
        }
        let (a, b) = trend_pair(606_000 + seed, "w.t", "c.h", 260, &planted, planted.len());
        let d = discover_from_representations(&[a, b], &params, true).unwrap();
        if d.records.len() == 1 && !d.records[0].meaningful {
            off_trend_hits += 1;
        }
    }
    let elapsed = started.elapsed();
    criterion(
        6,
        on_trend_hits >= 95 && off_trend_hits >= 95 && elapsed.as_secs_f64() < 30.0,
        &format!("meaningful {on_trend_hits}/100 on-trend, not meaningful {off_trend_hits}/100 off-trend, in {elapsed:.2?}"),
    );
}

/// 7. Independent white-noise pairs sharing one coincidental alignment are
///    flagged meaningful in at most 10% of 200 seeded trials.
#[test]
fn acceptance_07_coincidence_rejection() {
    let _slot = heavy_slot();
    let params = PodsParams::default();
    let mut flagged = 0;
    for seed in 0..200 {
        let (a, b) = coincidence_pair(707_000 + seed, "n1.x", "n2.y", 200, 77);
        let d = discover_from_representations(&[a, b], &params, true).unwrap();
        if d.records.len() == 1 && d.records[0].meaningful {
            flagged += 1;
        }
    }
    criterion(7, flagged <= 20, &format!("{flagged}/200 coincidental pairs flagged meaningful"));
}

/// Fixture for criterion 8: `n_reps` representations in which exactly the
/// first `n_indexed` pairs (in lexicographic order) share one unique
/// outlier day each.
fn pair_posted_fixture(n_reps: usize, n_indexed: usize) -> Vec<Representation> {
    let mut outlier_days: Vec<Vec<usize>> = vec![Vec::new(); n_reps];
    let mut pair_index = 0;
    'outer: for i in 0..n_reps {
        for j in i + 1..n_reps {
            if pair_index >= n_indexed {
                break 'outer;
            }
            outlier_days[i].push(pair_index);
            outlier_days[j].push(pair_index);
            pair_index += 1;
        }
    }
    assert_eq!(pair_index, n_indexed);
    (0..n_reps)
        .map(|i| {
            let mut scores: Vec<(usize, f64)> =
                (0..n_indexed.max(1)).map(|d| (d, 0.0)).collect();
            for &d in &outlier_days[i] {
                scores[d].1 = 4.0;
            }
            representation(&format!("r{i:03}"), scores)
        })
        .collect()
}

/// Timing corpus: 8 active representations whose outliers co-occur (28
/// indexed pairs, constant), padded with inert representations whose
/// single outlier day is theirs alone. Inlier scores are bounded away from
/// the thresholds so the indexed-pair count is exact by construction, and
/// the inert series are long so each pruned pair carries real join cost.
fn timing_corpus(n_reps: usize, seed: u64) -> Vec<Representation> {
    const ACTIVE_LEN: usize = 400;
    const INERT_LEN: usize = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared_days = [100usize, 300, 500];
    let base: Vec<f64> = (0..ACTIVE_LEN)
        .map(|d| match shared_days.iter().position(|s| *s == d) {
            Some(0) => 4.5,
            Some(1) => 5.0,
            Some(_) => -4.8,
            None => rng.gen_range(-2.4..2.4),
        })
        .collect();
    (0..n_reps)
        .map(|i| {
            let scores: Vec<(usize, f64)> = if i < 8 {
                base.iter()
                    .enumerate()
                    .map(|(d, b)| (d, b + rng.gen_range(-0.45..0.45)))
                    .collect()
            } else {
                (0..INERT_LEN)
                    .map(|d| {
                        let v = if d == INERT_LEN - 1 - (i - 8) {
                            4.2
                        } else {
                            rng.gen_range(-2.9..2.9)
                        };
                        (d, v)
                    })
                    .collect()
            };
            representation(&format!("r{i:03}"), scores)
        })
        .collect()
}

/// 8. Pruning arithmetic matches the reference counts exactly, and on
///    corpora with a constant indexed-pair count the indexed runtime stays
///    flat while the exhaustive runtime grows with the pair universe.
#[test]
fn acceptance_08_pruning_and_timing_shape() {
    let _slot = heavy_slot();
    // Exact pruning arithmetic on the two reference corpora shapes.
    let mut arithmetic_ok = true;
    for (n_reps, n_indexed, expected_rounded) in [(10, 32, 0.29), (25, 209, 0.30)] {
        let index = build_index(pair_posted_fixture(n_reps, n_indexed)).unwrap();
        let report = index.pruning_report(ExclusionPolicy::None);
        let total = n_reps * (n_reps - 1) / 2;
        let exact = 1.0 - n_indexed as f64 / total as f64;
        arithmetic_ok &= report.total_pairs == total
            && report.indexed_pairs == n_indexed
            && (report.pruned_fraction - exact).abs() < 1e-12
            && ((report.pruned_fraction * 100.0).round() / 100.0 - expected_rounded).abs() < 1e-9;
    }

    // Timing shape over growing corpora with 28 indexed pairs throughout.
    // Pair evaluation runs on one thread so the wall clock measures work,
    // not scheduling.
    let params = PodsParams { bootstrap_b: 200, ..Default::default() };
    let sizes = [25usize, 30, 40, 70];
    let corpora: Vec<Vec<Representation>> =
        sizes.iter().map(|n| timing_corpus(*n, 808)).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let timed = |reps: &[Representation], with_index: bool| {
        pool.install(|| timing_report_from_representations(reps, &params, with_index).unwrap())
    };

    // Correctness pass, which doubles as warmup: identical detected sets,
    // exact pruning fraction, expected pair counts.
    let mut with_index_times = vec![f64::INFINITY; sizes.len()];
    let mut without_index_times = vec![f64::INFINITY; sizes.len()];
    for (i, (reps, n)) in corpora.iter().zip(sizes).enumerate() {
        let first_with = timed(reps, true);
        let first_without = timed(reps, false);
        assert_eq!(first_with.meaningful_pairs, first_without.meaningful_pairs);
        let expected_pruned = 1.0 - 28.0 / (n * (n - 1) / 2) as f64;
        assert!((first_with.pruned_fraction - expected_pruned).abs() < 1e-12);
        assert_eq!(first_with.n_pairs_evaluated, 28);
        assert_eq!(first_without.n_pairs_evaluated, n * (n - 1) / 2);
        with_index_times[i] = first_with.elapsed_ms;
        without_index_times[i] = first_without.elapsed_ms;
    }

    // Best of four rounds, interleaved across corpus sizes so load or
    // frequency drift hits every size alike instead of one size's whole
    // measurement window.
    for _ in 0..3 {
        for (i, reps) in corpora.iter().enumerate() {
            with_index_times[i] = with_index_times[i].min(timed(reps, true).elapsed_ms);
            without_index_times[i] = without_index_times[i].min(timed(reps, false).elapsed_ms);
        }
    }

    let flat = with_index_times.iter().cloned().fold(f64::NAN, f64::max)
        / with_index_times.iter().cloned().fold(f64::NAN, f64::min);
    let monotone = without_index_times.windows(2).all(|w| w[0] < w[1]);
    criterion(
        8,
        arithmetic_ok && flat < 1.25 && monotone,
        &format!(
            "pruning arithmetic exact; with-index {with_index_times:.1?} ms (max/min {flat:.3}), without-index {without_index_times:.1?} ms"
        ),
    );
}

/// 9. On a corpus of 20 planted-positive and 20 planted-negative pairs the
///    evaluation harness reports F >= 0.85 under default parameters.
#[test]
fn acceptance_09_synthetic_gold_metrics() {
    let _slot = heavy_slot();
    let (reps, labels) = labeled_corpus(909);
    let d = discover_from_representations(&reps, &PodsParams::default(), true).unwrap();
    let m = evaluate(&d.records, &labels).unwrap();
    criterion(
        9,
        m.f_measure >= 0.85,
        &format!(
            "precision {:.3}, recall {:.3}, F {:.3} (tp {}, fp {}, fn {})",
            m.precision, m.recall, m.f_measure, m.true_positives, m.false_positives, m.false_negatives
        ),
    );
}

/// 10. The sensitivity sweep produces the F-vs-parameter table, and F is
///     nonincreasing in beta and in the goodness-of-fit floor.
#[test]
fn acceptance_10_sensitivity_sweep() {
    let _slot = heavy_slot();
    let (reps, labels) = labeled_corpus(1010);
    let params = PodsParams::default();
    let grids = SweepGrids::default();
    let table = sensitivity_sweep(&reps, &params, &labels, &grids).unwrap();

    println!("parameter      value        F");
    for point in &table {
        println!("{:<12} {:>8.3} {:>8.3}", point.parameter, point.value, point.metrics.f_measure);
    }

    let series = |name: &str| -> Vec<f64> {
        table
            .iter()
            .filter(|p| p.parameter == name)
            .map(|p| p.metrics.f_measure)
            .collect()
    };
    let nonincreasing = |f: &[f64]| f.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let beta_f = series("beta");
    let r2_f = series("r2_min");
    criterion(
        10,
        nonincreasing(&beta_f) && nonincreasing(&r2_f),
        &format!("F over beta grid {beta_f:.3?}; over r2_min grid {r2_f:.3?}"),
    );
}
