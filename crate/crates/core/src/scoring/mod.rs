//! Outlier-score representations of attribute series.
//!
//! A raw series is first mapped to initial scores by a pluggable scoring
//! function (windowed mean residuals by default, see [`MeanResidual`]).
//! Cumulative scores blend each initial score with an exponentially decayed
//! carry-over of its predecessors so that lingering effects of extreme
//! events stay visible; dominant scores keep whichever of the two has the
//! larger magnitude, so no outlier is ever dampened.

mod mean_residual;
mod registry;

pub use mean_residual::{mean_residuals, MeanResidual};
pub use registry::{ScoreFunction, ScoreRegistry};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{Granularity, Timestamp};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("window must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("series {id} has {n_points} points; a window of {window} needs at least {} to score anything", window + 1)]
    TooFewPoints {
        id: String,
        n_points: usize,
        window: usize,
    },
    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("expected a {expected:?} representation, got {actual:?}")]
    WrongKind { expected: ScoreKind, actual: ScoreKind },
    #[error("representations of {id} have mismatched timestamp keys")]
    KeyMismatch { id: String },
    #[error("{0}")]
    InvalidThresholds(String),
    #[error("representation {id} contains a non-finite score at {timestamp}")]
    NonFiniteScore { id: String, timestamp: Timestamp },
    #[error("unknown scoring function {0:?}")]
    UnknownFunction(String),
}

/// Positive and negative outlier thresholds. A score is an outlier when it
/// strictly exceeds `theta_pos` or strictly falls below `theta_neg`; the
/// thresholds themselves are inliers. One-sided analyses set the excluded
/// side to plus or minus infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(with = "extended_f64")]
    pub theta_pos: f64,
    #[serde(with = "extended_f64")]
    pub theta_neg: f64,
}

impl Thresholds {
    pub fn new(theta_pos: f64, theta_neg: f64) -> Result<Self, ScoringError> {
        if theta_pos <= 0.0 || theta_pos.is_nan() {
            return Err(ScoringError::InvalidThresholds(format!(
                "theta_pos must be > 0, got {theta_pos}"
            )));
        }
        if theta_neg >= 0.0 || theta_neg.is_nan() {
            return Err(ScoringError::InvalidThresholds(format!(
                "theta_neg must be < 0, got {theta_neg}"
            )));
        }
        Ok(Thresholds { theta_pos, theta_neg })
    }

    /// Symmetric thresholds at plus/minus `theta`.
    pub fn symmetric(theta: f64) -> Result<Self, ScoringError> {
        Thresholds::new(theta, -theta)
    }

    pub fn is_outlier(&self, score: f64) -> bool {
        score > self.theta_pos || score < self.theta_neg
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { theta_pos: 3.0, theta_neg: -3.0 }
    }
}

/// Serialize possibly-infinite threshold values in a way that survives both
/// TOML and JSON; JSON has no literal for infinities.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(v),
            Raw::Text(t) => match t.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid threshold {other:?}"))),
            },
        }
    }
}

/// Which transformation produced a representation's scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    MeanResidual,
    Cumulative,
    Dominant,
}

/// Per-timestamp outlier scores for one attribute under one scoring
/// function, plus the thresholds that separate its outliers from inliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub attr_id: String,
    pub kind: ScoreKind,
    /// Window size in observed points, for windowed initial functions and
    /// everything derived from them.
    pub window_phi: Option<usize>,
    /// Decay coefficient, present on cumulative and dominant kinds.
    pub lambda: Option<f64>,
    pub scores: BTreeMap<Timestamp, f64>,
    pub thresholds: Thresholds,
}

impl Representation {
    /// Wrap externally computed initial scores. Any scoring function whose
    /// larger absolute scores mean more severe outliers is acceptable here.
    pub fn from_scores(
        attr_id: impl Into<String>,
        scores: BTreeMap<Timestamp, f64>,
        thresholds: Thresholds,
    ) -> Result<Self, ScoringError> {
        let attr_id = attr_id.into();
        for (ts, v) in &scores {
            if !v.is_finite() {
                return Err(ScoringError::NonFiniteScore { id: attr_id, timestamp: *ts });
            }
        }
        Ok(Representation {
            attr_id,
            kind: ScoreKind::MeanResidual,
            window_phi: None,
            lambda: None,
            scores,
            thresholds,
        })
    }

    /// Identifier used in the alignment index and in reports: the attribute
    /// id, qualified by the window when one applies.
    pub fn id(&self) -> String {
        match self.window_phi {
            Some(phi) => format!("{}@{}", self.attr_id, phi),
            None => self.attr_id.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn outlier_timestamps(&self) -> BTreeSet<Timestamp> {
        self.scores
            .iter()
            .filter(|(_, &u)| self.thresholds.is_outlier(u))
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Partition a representation's timestamps into outliers and inliers under
/// its thresholds. Scores exactly at a threshold are inliers.
pub fn classify(rep: &Representation) -> (BTreeSet<Timestamp>, BTreeSet<Timestamp>) {
    let mut outliers = BTreeSet::new();
    let mut inliers = BTreeSet::new();
    for (ts, &u) in &rep.scores {
        if rep.thresholds.is_outlier(u) {
            outliers.insert(*ts);
        } else {
            inliers.insert(*ts);
        }
    }
    (outliers, inliers)
}

/// Blend each initial score with the decayed carry-over of its predecessors:
/// the first observed score is kept as-is, every later one becomes
/// `(1 - lambda) * u + lambda * previous_cumulative`.
///
/// The recurrence runs over the observed sequence. With `gap_decay` set, the
/// carry-over instead decays with the calendar gap between consecutive
/// observations: lambda is raised to the number of periods elapsed, so a
/// missing stretch of days drains the cumulative effect the way observed
/// quiet days would not.
pub fn cumulative_scores(
    initial: &Representation,
    lambda: f64,
    gap_decay: Option<Granularity>,
) -> Result<Representation, ScoringError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ScoringError::InvalidLambda(lambda));
    }
    if initial.kind != ScoreKind::MeanResidual {
        return Err(ScoringError::WrongKind {
            expected: ScoreKind::MeanResidual,
            actual: initial.kind,
        });
    }

    let mut scores = BTreeMap::new();
    let mut prev: Option<(Timestamp, f64)> = None;
    for (&ts, &u) in &initial.scores {
        let c = match prev {
            None => u,
            Some((prev_ts, prev_c)) => {
                let lam = match gap_decay {
                    Some(granularity) => {
                        let gap = ts.periods_since(&prev_ts, granularity).max(1);
                        lambda.powi(gap as i32)
                    }
                    None => lambda,
                };
                (1.0 - lam) * u + lam * prev_c
            }
        };
        scores.insert(ts, c);
        prev = Some((ts, c));
    }

    Ok(Representation {
        attr_id: initial.attr_id.clone(),
        kind: ScoreKind::Cumulative,
        window_phi: initial.window_phi,
        lambda: Some(lambda),
        scores,
        thresholds: initial.thresholds,
    })
}

/// Keep, per timestamp, whichever of the initial and cumulative scores has
/// the larger magnitude; ties keep the initial score.
pub fn dominant_scores(
    initial: &Representation,
    cumulative: &Representation,
) -> Result<Representation, ScoringError> {
    if cumulative.kind != ScoreKind::Cumulative {
        return Err(ScoringError::WrongKind {
            expected: ScoreKind::Cumulative,
            actual: cumulative.kind,
        });
    }
    if initial.attr_id != cumulative.attr_id
        || initial.scores.len() != cumulative.scores.len()
        || !initial.scores.keys().eq(cumulative.scores.keys())
    {
        return Err(ScoringError::KeyMismatch { id: initial.attr_id.clone() });
    }

    let scores = initial
        .scores
        .iter()
        .map(|(ts, &u)| {
            let c = cumulative.scores[ts];
            let dominant = if u.abs() >= c.abs() { u } else { c };
            (*ts, dominant)
        })
        .collect();

    Ok(Representation {
        attr_id: initial.attr_id.clone(),
        kind: ScoreKind::Dominant,
        window_phi: initial.window_phi,
        lambda: cumulative.lambda,
        scores,
        thresholds: initial.thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep_from(values: &[f64]) -> Representation {
        let scores = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (Timestamp::from_date(2013, 1, 1 + i as u32), v))
            .collect();
        Representation::from_scores("x", scores, Thresholds::default()).unwrap()
    }

    fn score_vec(rep: &Representation) -> Vec<f64> {
        rep.scores.values().copied().collect()
    }

    #[test]
    fn cumulative_lambda_zero_is_identity() {
        let rep = rep_from(&[2.0, -1.0, 0.5, 4.0]);
        let cum = cumulative_scores(&rep, 0.0, None).unwrap();
        assert_eq!(score_vec(&cum), vec![2.0, -1.0, 0.5, 4.0]);
    }

    #[test]
    fn cumulative_hand_evaluated() {
        let rep = rep_from(&[2.0, 0.0, 0.0]);
        let cum = cumulative_scores(&rep, 0.5, None).unwrap();
        assert_eq!(score_vec(&cum), vec![2.0, 1.0, 0.5]);

        let rep = rep_from(&[1.0, 2.0, 3.0]);
        let cum = cumulative_scores(&rep, 0.5, None).unwrap();
        assert_eq!(score_vec(&cum), vec![1.0, 1.5, 2.25]);
    }

    #[test]
    fn cumulative_rejects_bad_lambda() {
        let rep = rep_from(&[1.0]);
        assert!(matches!(
            cumulative_scores(&rep, 1.5, None),
            Err(ScoringError::InvalidLambda(_))
        ));
        assert!(matches!(
            cumulative_scores(&rep, -0.1, None),
            Err(ScoringError::InvalidLambda(_))
        ));
    }

    #[test]
    fn gap_decay_matches_plain_recurrence_on_contiguous_days() {
        let rep = rep_from(&[1.0, -2.0, 0.5, 3.0, -1.0]);
        let plain = cumulative_scores(&rep, 0.5, None).unwrap();
        let gapped = cumulative_scores(&rep, 0.5, Some(Granularity::Day)).unwrap();
        assert_eq!(score_vec(&plain), score_vec(&gapped));
    }

    #[test]
    fn gap_decay_drains_carry_over_across_missing_days() {
        let scores: BTreeMap<_, _> = [
            (Timestamp::from_date(2013, 1, 1), 4.0),
            (Timestamp::from_date(2013, 1, 4), 0.0),
        ]
        .into_iter()
        .collect();
        let rep = Representation::from_scores("x", scores, Thresholds::default()).unwrap();
        let cum = cumulative_scores(&rep, 0.5, Some(Granularity::Day)).unwrap();
        // Three calendar days elapse, so the carry is 0.5^3 * 4 = 0.5.
        assert!((score_vec(&cum)[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dominant_picks_larger_magnitude_and_keeps_ties_initial() {
        let initial = rep_from(&[0.2, -3.1, 1.0]);
        let mut cumulative = cumulative_scores(&initial, 0.5, None).unwrap();
        for (ts, c) in [(1u32, 1.5), (2, -2.0), (3, 1.0)] {
            *cumulative.scores.get_mut(&Timestamp::from_date(2013, 1, ts)).unwrap() = c;
        }
        let dom = dominant_scores(&initial, &cumulative).unwrap();
        assert_eq!(score_vec(&dom), vec![1.5, -3.1, 1.0]);
    }

    #[test]
    fn dominant_rejects_key_mismatch() {
        let initial = rep_from(&[1.0, 2.0]);
        let other = rep_from(&[1.0, 2.0, 3.0]);
        let cumulative = cumulative_scores(&other, 0.5, None).unwrap();
        assert!(matches!(
            dominant_scores(&initial, &cumulative),
            Err(ScoringError::KeyMismatch { .. })
        ));
    }

    #[test]
    fn classify_uses_strict_inequalities() {
        let rep = rep_from(&[3.0, 3.01, -4.0, -3.0, 0.0]);
        let (outliers, inliers) = classify(&rep);
        let day = |d| Timestamp::from_date(2013, 1, d);
        assert!(inliers.contains(&day(1))); // exactly theta_pos
        assert!(outliers.contains(&day(2)));
        assert!(outliers.contains(&day(3)));
        assert!(inliers.contains(&day(4))); // exactly theta_neg
        assert!(inliers.contains(&day(5)));
    }

    #[test]
    fn thresholds_reject_wrong_signs() {
        assert!(Thresholds::new(-1.0, -3.0).is_err());
        assert!(Thresholds::new(3.0, 1.0).is_err());
        assert!(Thresholds::new(f64::INFINITY, -3.0).is_ok());
    }

    #[test]
    fn thresholds_serde_handles_infinities() {
        let t = Thresholds::new(3.0, f64::NEG_INFINITY).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Thresholds = serde_json::from_str(&json).unwrap();
        assert_eq!(back.theta_pos, 3.0);
        assert!(back.theta_neg.is_infinite() && back.theta_neg < 0.0);
    }
}
