//! Data-trend detection over aligned scores.
//!
//! A candidate pair's aligned dominant scores are fitted with weighted
//! linear regressions in both directions, sharing one weight vector that
//! biases the fit toward outliers and near-outliers: outliers weigh 1,
//! inliers decay exponentially with their distance to the nearer threshold,
//! and a pair weighs as much as its weaker side. A data-trend exists when
//! the slope of at least one direction is statistically different from
//! zero.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ingest::inner_join_timestamps;
use crate::scoring::{Representation, Thresholds};
use crate::series::Timestamp;

/// Weighted predictor variance below this is treated as a degenerate fit;
/// scores live on an O(1) scale.
const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrendError {
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("sample has {n} aligned pairs, fewer than the required {min}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("weighted predictor variance is zero; no slope can be fitted")]
    DegenerateFit,
}

/// Weight of one score: 1 for outliers (and scores exactly at a threshold),
/// otherwise alpha raised to the distance from the score to its side's
/// threshold. Closer to a threshold means closer to 1.
pub fn omega(u: f64, thresholds: &Thresholds, alpha: f64) -> Result<f64, TrendError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TrendError::InvalidAlpha(alpha));
    }
    if thresholds.is_outlier(u) || u == thresholds.theta_pos || u == thresholds.theta_neg {
        return Ok(1.0);
    }
    let exponent = if u >= 0.0 {
        thresholds.theta_pos - u
    } else {
        thresholds.theta_neg.abs() - u.abs()
    };
    Ok(alpha.powf(exponent))
}

/// One aligned observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPoint {
    pub timestamp: Timestamp,
    pub u1: f64,
    pub u2: f64,
}

/// The aligned scores of one candidate pair, with each pair's
/// both-sides-outlier flag and its shared regression weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub points: Vec<AlignedPoint>,
    /// True where both sides are outliers under their own thresholds.
    pub outlier_mask: Vec<bool>,
    /// min(omega(u1), omega(u2)) per point, shared by both fit directions.
    pub weights: Vec<f64>,
}

impl AlignedSample {
    /// Join two representations on their timestamps and attach masks and
    /// weights.
    pub fn from_representations(
        a: &Representation,
        b: &Representation,
        alpha: f64,
    ) -> Result<Self, TrendError> {
        let joined = inner_join_timestamps(a, b);
        let mut points = Vec::with_capacity(joined.len());
        let mut outlier_mask = Vec::with_capacity(joined.len());
        let mut weights = Vec::with_capacity(joined.len());
        for (timestamp, u1, u2) in joined {
            points.push(AlignedPoint { timestamp, u1, u2 });
            outlier_mask.push(a.thresholds.is_outlier(u1) && b.thresholds.is_outlier(u2));
            weights.push(f64::min(
                omega(u1, &a.thresholds, alpha)?,
                omega(u2, &b.thresholds, alpha)?,
            ));
        }
        Ok(AlignedSample { points, outlier_mask, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_aligned_outliers(&self) -> usize {
        self.outlier_mask.iter().filter(|m| **m).count()
    }

    /// The sample with the two sides swapped; weights and mask are
    /// symmetric and carry over unchanged.
    pub fn swapped(&self) -> AlignedSample {
        AlignedSample {
            points: self
                .points
                .iter()
                .map(|p| AlignedPoint { timestamp: p.timestamp, u1: p.u2, u2: p.u1 })
                .collect(),
            outlier_mask: self.outlier_mask.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Which side is regressed on which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// f1: second side as response, first as predictor.
    U2OnU1,
    /// f2: first side as response, second as predictor.
    U1OnU2,
}

impl Direction {
    fn split(self, p: &AlignedPoint) -> (f64, f64) {
        match self {
            Direction::U2OnU1 => (p.u1, p.u2),
            Direction::U1OnU2 => (p.u2, p.u1),
        }
    }
}

/// One fitted weighted linear regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub direction: Direction,
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided p-value of the slope against zero, from its weighted
    /// sampling distribution with n - 2 degrees of freedom.
    pub slope_p_value: f64,
    pub slope_standard_error: f64,
    pub adjusted_r2: f64,
    /// response - (slope * predictor + intercept), in point order.
    pub residuals: Vec<f64>,
    pub weighted: bool,
    pub n: usize,
}

impl TrendModel {
    pub fn estimate(&self, predictor: f64) -> f64 {
        self.slope * predictor + self.intercept
    }
}

/// Fit one direction by the closed-form weighted normal equations and
/// attach the weighted goodness-of-fit and slope-test statistics.
pub fn fit_wls(
    sample: &AlignedSample,
    direction: Direction,
    min_aligned: usize,
) -> Result<TrendModel, TrendError> {
    let n = sample.len();
    let min = min_aligned.max(3);
    if n < min {
        return Err(TrendError::SampleTooSmall { n, min });
    }

    let w_sum: f64 = sample.weights.iter().sum();
    if w_sum <= 0.0 {
        return Err(TrendError::DegenerateFit);
    }
    let mut x_mean = 0.0;
    let mut y_mean = 0.0;
    for (p, w) in sample.points.iter().zip(&sample.weights) {
        let (x, y) = direction.split(p);
        x_mean += w * x;
        y_mean += w * y;
    }
    x_mean /= w_sum;
    y_mean /= w_sum;

    let mut s_xx = 0.0;
    let mut s_xy = 0.0;
    let mut s_yy = 0.0;
    for (p, w) in sample.points.iter().zip(&sample.weights) {
        let (x, y) = direction.split(p);
        s_xx += w * (x - x_mean) * (x - x_mean);
        s_xy += w * (x - x_mean) * (y - y_mean);
        s_yy += w * (y - y_mean) * (y - y_mean);
    }

    if s_xx / w_sum < DEGENERATE_VARIANCE {
        return Err(TrendError::DegenerateFit);
    }

    let slope = s_xy / s_xx;
    let intercept = y_mean - slope * x_mean;

    let residuals: Vec<f64> = sample
        .points
        .iter()
        .map(|p| {
            let (x, y) = direction.split(p);
            y - (slope * x + intercept)
        })
        .collect();

    let ss_res: f64 = residuals
        .iter()
        .zip(&sample.weights)
        .map(|(r, w)| w * r * r)
        .sum();
    let r2 = if s_yy > 0.0 {
        1.0 - ss_res / s_yy
    } else if ss_res.abs() < 1e-12 {
        1.0
    } else {
        0.0
    };
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - 2.0);

    let df = (n - 2) as f64;
    let residual_variance = ss_res / df;
    let slope_standard_error = (residual_variance / s_xx).sqrt();
    let slope_p_value = slope_p_value(slope, slope_standard_error, df);

    let weighted = sample.weights.windows(2).any(|w| w[0] != w[1]);

    Ok(TrendModel {
        direction,
        slope,
        intercept,
        slope_p_value,
        slope_standard_error,
        adjusted_r2,
        residuals,
        weighted,
        n,
    })
}

fn slope_p_value(slope: f64, standard_error: f64, df: f64) -> f64 {
    if standard_error == 0.0 {
        return if slope == 0.0 { 1.0 } else { 0.0 };
    }
    let t = slope / standard_error;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    2.0 * dist.sf(t.abs())
}

/// Outcome of testing a fitted slope against zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeTest {
    pub reject: bool,
    pub p_value: f64,
}

/// Two-sided test of the null hypothesis that the slope is zero, rejected
/// when the p-value falls below the significance level.
pub fn slope_test(model: &TrendModel, significance: f64) -> SlopeTest {
    SlopeTest {
        reject: model.slope_p_value < significance,
        p_value: model.slope_p_value,
    }
}

/// One direction's outcome inside a trend detection: a fitted model with
/// its test, or the reason the fit was skipped.
pub type DirectionOutcome = Result<(TrendModel, SlopeTest), TrendError>;

/// Both directions fitted over the same weights, and the overall verdict.
#[derive(Debug, Clone)]
pub struct TrendDetection {
    pub f1: DirectionOutcome,
    pub f2: DirectionOutcome,
}

impl TrendDetection {
    /// A data-trend exists when at least one direction's slope test
    /// rejects.
    pub fn trend_found(&self) -> bool {
        [&self.f1, &self.f2]
            .into_iter()
            .any(|d| matches!(d, Ok((_, test)) if test.reject))
    }
}

/// Fit f1 and f2 over the sample's shared weights and run the slope test on
/// each. A degenerate direction is reported as such without failing the
/// other.
pub fn detect_data_trend(
    sample: &AlignedSample,
    significance: f64,
    min_aligned: usize,
) -> TrendDetection {
    let run = |direction| {
        fit_wls(sample, direction, min_aligned)
            .map(|model| { let test = slope_test(&model, significance); (model, test) })
    };
    TrendDetection { f1: run(Direction::U2OnU1), f2: run(Direction::U1OnU2) }
}
