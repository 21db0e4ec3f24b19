//! Synthetic fixtures shared by the integration and acceptance tests.
//!
//! Everything here is built at the representation level: sequences of
//! initial scores with known structure, fed into the pipeline the same way
//! an external scoring function would.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::Normal;

use outrel_core::pipeline::PairLabel;
use outrel_core::{Granularity, Representation, Thresholds, Timestamp};

pub fn day(i: usize) -> Timestamp {
    Timestamp::from_date(2013, 1, 1).offset(i as i64, Granularity::Day)
}

pub fn representation(attr: &str, scores: Vec<(usize, f64)>) -> Representation {
    let map: BTreeMap<Timestamp, f64> = scores.into_iter().map(|(d, v)| (day(d), v)).collect();
    Representation::from_scores(attr, map, Thresholds::default()).unwrap()
}

/// A pair with a genuine inlier relationship y = -x plus noise, and aligned
/// outliers planted at magnitudes in [3.5, 5) with balanced signs. The
/// first `outlier_days.len() - n_off_trend` planted outliers lie on the
/// line y = -x; the remaining ones are shifted to y = -x + 8, contradicting
/// the trend.
pub fn trend_pair(
    seed: u64,
    attr_a: &str,
    attr_b: &str,
    n_days: usize,
    outlier_days: &[usize],
    n_off_trend: usize,
) -> (Representation, Representation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.2).unwrap();
    let n_on_trend = outlier_days.len() - n_off_trend;

    let mut xs = Vec::with_capacity(n_days);
    let mut ys = Vec::with_capacity(n_days);
    for d in 0..n_days {
        if let Some(j) = outlier_days.iter().position(|o| *o == d) {
            let magnitude = rng.gen_range(3.5..5.0);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let x = sign * magnitude;
            let y = if j < n_on_trend { -x } else { -x + 8.0 };
            xs.push((d, x));
            ys.push((d, y));
        } else {
            let x: f64 = rng.sample(std_normal);
            let y = -x + rng.sample(noise);
            xs.push((d, x));
            ys.push((d, y));
        }
    }
    (representation(attr_a, xs), representation(attr_b, ys))
}

/// Two independent white-noise score sequences sharing exactly one planted
/// aligned outlier.
pub fn coincidence_pair(
    seed: u64,
    attr_a: &str,
    attr_b: &str,
    n_days: usize,
    planted_day: usize,
) -> (Representation, Representation) {
    corner_pair(seed, attr_a, attr_b, n_days, &[planted_day])
}

/// Independent white-noise sequences with aligned outliers planted in
/// cycling quadrants (+,+), (+,-), (-,+): no single line can sit close to
/// more than a third of three or more of them.
pub fn corner_pair(
    seed: u64,
    attr_a: &str,
    attr_b: &str,
    n_days: usize,
    planted_days: &[usize],
) -> (Representation, Representation) {
    const CORNERS: [(f64, f64); 3] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut xs = Vec::with_capacity(n_days);
    let mut ys = Vec::with_capacity(n_days);
    for d in 0..n_days {
        if let Some(j) = planted_days.iter().position(|p| *p == d) {
            let (sign_x, sign_y) = CORNERS[j % CORNERS.len()];
            xs.push((d, sign_x * rng.gen_range(3.5..4.5)));
            ys.push((d, sign_y * rng.gen_range(3.5..4.5)));
        } else {
            xs.push((d, rng.sample(std_normal)));
            ys.push((d, rng.sample(std_normal)));
        }
    }
    (representation(attr_a, xs), representation(attr_b, ys))
}

/// A labeled corpus of 20 planted-positive and 20 planted-negative pairs.
///
/// Positives 0..10 have all aligned outliers on the trend. Positives
/// 10..20 have one of six nudged clearly off it (bounded fraction near
/// 5/6), so high beta values start rejecting them while the defaults keep
/// them. Negatives are independent noise with aligned outliers scattered
/// over non-antipodal quadrant corners — six for 20..30, three for 30..40 —
/// which no single regression line can track. Each pair's planted days
/// fall in its own residue class so no outlier day is shared across pairs
/// by construction.
pub fn labeled_corpus(seed: u64) -> (Vec<Representation>, Vec<PairLabel>) {
    let n_days = 400;
    let mut reps = Vec::new();
    let mut labels = Vec::new();
    for k in 0..40usize {
        let planted: Vec<usize> = (0..6).map(|j| 7 + k + 40 * j).collect();
        let positive = k < 20;
        let (name_a, name_b) = (format!("p{k:02}.a"), format!("p{k:02}.b"));
        let pair_seed = seed.wrapping_mul(41).wrapping_add(k as u64);
        let (a, b) = if k < 10 {
            trend_pair(pair_seed, &name_a, &name_b, n_days, &planted, 0)
        } else if k < 20 {
            let (a, mut b) = trend_pair(pair_seed, &name_a, &name_b, n_days, &planted, 0);
            // Push one planted outlier off the trend, further from zero so
            // it stays an outlier without gaining extreme leverage.
            let off_day = day(planted[0]);
            let x = a.scores[&off_day];
            *b.scores.get_mut(&off_day).unwrap() = -x - x.signum() * 2.5;
            (a, b)
        } else if k < 30 {
            corner_pair(pair_seed, &name_a, &name_b, n_days, &planted)
        } else {
            corner_pair(pair_seed, &name_a, &name_b, n_days, &planted[..3])
        };
        reps.push(a);
        reps.push(b);
        labels.push(PairLabel::new(name_a, name_b, positive));
    }
    (reps, labels)
}
