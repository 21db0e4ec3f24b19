//! Meaningfulness verification for a detected data-trend.
//!
//! A trend whose slope test rejected is evidence of a meaningful outlier
//! relationship when (a) it explains a reasonable share of the variance and
//! (b) the aligned outliers are consistent with it: most of their absolute
//! estimation errors fall within a high percentile of the model's overall
//! error distribution. Error samples are small, so the percentile and its
//! confidence interval come from seeded bootstrap resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trend::{AlignedSample, TrendModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeaningfulnessError {
    #[error("error distribution is empty")]
    EmptyErrors,
    #[error("bootstrap needs at least 200 resamples, got {0}")]
    TooFewResamples(usize),
    #[error("percentile level must lie in (0, 100), got {0}")]
    InvalidLevel(f64),
    #[error("sample has no aligned outliers; the pair should have been pruned")]
    NoAlignedOutliers,
}

/// How a percentile is read off a finite sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileRule {
    /// Linear interpolation between the two nearest order statistics.
    #[default]
    Linear,
    /// The smallest order statistic at or above the level.
    NearestRank,
}

/// Percentile of `values` at `level` in (0, 100). `values` need not be
/// sorted; ties and single elements behave as expected.
pub fn percentile(values: &[f64], level: f64, rule: PercentileRule) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    percentile_of_sorted(&sorted, level, rule)
}

fn percentile_of_sorted(sorted: &[f64], level: f64, rule: PercentileRule) -> f64 {
    let n = sorted.len();
    match rule {
        PercentileRule::Linear => {
            let h = (n as f64 - 1.0) * level / 100.0;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            if lo == hi {
                sorted[lo]
            } else {
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            }
        }
        PercentileRule::NearestRank => {
            let rank = ((level / 100.0) * n as f64).ceil().max(1.0) as usize;
            sorted[rank.min(n) - 1]
        }
    }
}

/// Absolute estimation errors of a fitted model: over every aligned pair
/// used to fit it, and over the aligned-outlier pairs alone. The outlier
/// errors are a sub-multiset of the overall ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistributions {
    pub e_u: Vec<f64>,
    pub e_o: Vec<f64>,
}

impl ErrorDistributions {
    pub fn from_model(model: &TrendModel, sample: &AlignedSample) -> Self {
        let e_u: Vec<f64> = model.residuals.iter().map(|r| r.abs()).collect();
        let e_o: Vec<f64> = e_u
            .iter()
            .zip(&sample.outlier_mask)
            .filter(|(_, m)| **m)
            .map(|(e, _)| *e)
            .collect();
        ErrorDistributions { e_u, e_o }
    }
}

/// A bootstrap-estimated percentile with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPercentile {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimate the `level`-percentile of `values` from `resamples` bootstrap
/// resamples drawn with replacement: the estimate is the median of the
/// per-resample percentiles, the interval their 2.5th and 97.5th
/// percentiles. Deterministic for a given seed.
pub fn bootstrap_percentile(
    values: &[f64],
    level: f64,
    resamples: usize,
    seed: u64,
    rule: PercentileRule,
) -> Result<BootstrapPercentile, MeaningfulnessError> {
    if values.is_empty() {
        return Err(MeaningfulnessError::EmptyErrors);
    }
    if resamples < 200 {
        return Err(MeaningfulnessError::TooFewResamples(resamples));
    }
    if !(level > 0.0 && level < 100.0) {
        return Err(MeaningfulnessError::InvalidLevel(level));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut resample = vec![0.0; n];
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in resample.iter_mut() {
            *slot = values[rng.gen_range(0..n)];
        }
        estimates.push(percentile(&resample, level, rule));
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).expect("finite percentiles"));

    Ok(BootstrapPercentile {
        estimate: percentile_of_sorted(&estimates, 50.0, rule),
        ci_low: percentile_of_sorted(&estimates, 2.5, rule),
        ci_high: percentile_of_sorted(&estimates, 97.5, rule),
    })
}

/// Whether the aligned outliers are consistent with a fitted trend, with
/// the numbers behind the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rho_percentile: f64,
    pub rho_estimate: f64,
    pub rho_ci: (f64, f64),
    /// Share of aligned-outlier errors at or below the estimate.
    pub bounded_fraction: f64,
    pub beta: f64,
    pub consistent: bool,
}

/// Inputs to one meaningfulness verification, typically drawn from the run
/// parameters.
#[derive(Debug, Clone, Copy)]
pub struct VerificationParams {
    pub r2_min: f64,
    pub beta: f64,
    pub rho_level: f64,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub percentile_rule: PercentileRule,
}

/// Reasonable goodness-of-fit: the adjusted R-squared reaches the floor.
pub fn goodness_of_fit_check(model: &TrendModel, r2_min: f64) -> bool {
    model.adjusted_r2 >= r2_min
}

/// Check that at least a fraction `beta` of the aligned-outlier errors are
/// bounded by the bootstrap estimate of the `rho_level`-percentile of the
/// model's overall error distribution.
pub fn consistency_check(
    model: &TrendModel,
    sample: &AlignedSample,
    beta: f64,
    rho_level: f64,
    resamples: usize,
    seed: u64,
    rule: PercentileRule,
) -> Result<ConsistencyReport, MeaningfulnessError> {
    let errors = ErrorDistributions::from_model(model, sample);
    if errors.e_o.is_empty() {
        return Err(MeaningfulnessError::NoAlignedOutliers);
    }
    let rho = bootstrap_percentile(&errors.e_u, rho_level, resamples, seed, rule)?;
    let bounded = errors.e_o.iter().filter(|e| **e <= rho.estimate).count();
    let bounded_fraction = bounded as f64 / errors.e_o.len() as f64;
    Ok(ConsistencyReport {
        rho_percentile: rho_level,
        rho_estimate: rho.estimate,
        rho_ci: (rho.ci_low, rho.ci_high),
        bounded_fraction,
        beta,
        consistent: bounded_fraction >= beta,
    })
}

/// Verdict for one direction's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeaningfulnessVerdict {
    pub meaningful: bool,
    pub gof: bool,
    /// Absent when the goodness-of-fit gate already failed; consistency of
    /// the outliers with an unreliable model proves nothing.
    pub consistency: Option<ConsistencyReport>,
}

/// A model that passed the slope test supports a meaningful outlier
/// relationship when it both fits reasonably and the aligned outliers are
/// consistent with it. Consistency is only checked once the fit clears the
/// goodness-of-fit floor.
pub fn verify_meaningfulness(
    model: &TrendModel,
    sample: &AlignedSample,
    params: &VerificationParams,
) -> Result<MeaningfulnessVerdict, MeaningfulnessError> {
    let gof = goodness_of_fit_check(model, params.r2_min);
    if !gof {
        return Ok(MeaningfulnessVerdict { meaningful: false, gof, consistency: None });
    }
    let consistency = consistency_check(
        model,
        sample,
        params.beta,
        params.rho_level,
        params.bootstrap_resamples,
        params.seed,
        params.percentile_rule,
    )?;
    Ok(MeaningfulnessVerdict {
        meaningful: consistency.consistent,
        gof,
        consistency: Some(consistency),
    })
}
