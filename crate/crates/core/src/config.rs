//! Validated run parameters and their defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::ExclusionPolicy;
use crate::meaningfulness::PercentileRule;
use crate::scoring::Thresholds;
use crate::series::Granularity;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parameter {field}: {message} (legal range {legal})")]
pub struct ParamError {
    pub field: &'static str,
    pub message: String,
    pub legal: &'static str,
}

fn err(field: &'static str, value: impl std::fmt::Display, legal: &'static str) -> ParamError {
    ParamError { field, message: format!("got {value}"), legal }
}

/// Every knob of a discovery run. Construct via `Default` or
/// deserialization, then call [`PodsParams::validate`] before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodsParams {
    /// Decay base of the inlier regression weights; 1 makes every point
    /// weigh the same (ordinary least squares).
    pub alpha: f64,
    /// Minimum fraction of aligned-outlier errors a trend must bound.
    pub beta: f64,
    /// Goodness-of-fit floor on the adjusted R-squared.
    pub r2_min: f64,
    /// Cumulative-score decay; 0 disables cumulative effects.
    pub lambda: f64,
    /// Outlier thresholds applied to every representation.
    pub thresholds: Thresholds,
    /// Window sizes (in observed points) to score each attribute with.
    pub phi_list: Vec<usize>,
    /// Significance level of the regression slope test.
    pub significance: f64,
    /// Percentile of the overall error distribution bounding outlier errors.
    pub rho_level: f64,
    /// Bootstrap resamples behind the percentile estimate.
    pub bootstrap_b: usize,
    /// Minimum aligned pairs before a regression is attempted (>= 3).
    pub min_aligned: usize,
    /// Root seed; all randomness in a run derives from it.
    pub seed: u64,
    /// Initial scoring function, looked up in the score registry.
    pub psi: String,
    /// Population (true) or sample (false) deviation in mean residuals.
    pub population_sd: bool,
    /// When set, the cumulative carry-over decays with the calendar gap (in
    /// the given unit) between observations instead of treating the series
    /// as contiguous. Off by default.
    pub gap_decay: Option<Granularity>,
    /// How percentiles are read off finite samples.
    pub percentile_rule: PercentileRule,
    /// Candidate pairs dropped regardless of shared outliers.
    pub exclusion: ExclusionPolicy,
}

impl Default for PodsParams {
    fn default() -> Self {
        PodsParams {
            alpha: 0.5,
            beta: 0.67,
            r2_min: 0.25,
            lambda: 0.5,
            thresholds: Thresholds::default(),
            phi_list: vec![28, 30, 64, 90, 128, 180, 256, 360, 365],
            significance: 0.05,
            rho_level: 95.0,
            bootstrap_b: 1000,
            min_aligned: 10,
            seed: 0,
            psi: "mean_residual".to_string(),
            population_sd: true,
            gap_decay: None,
            percentile_rule: PercentileRule::default(),
            exclusion: ExclusionPolicy::default(),
        }
    }
}

impl PodsParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(err("alpha", self.alpha, "alpha in (0, 1]"));
        }
        if !(0.5..=1.0).contains(&self.beta) {
            return Err(err("beta", self.beta, "beta in [0.5, 1]"));
        }
        if self.r2_min > 1.0 || self.r2_min.is_nan() {
            return Err(err("r2_min", self.r2_min, "r2_min <= 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(err("lambda", self.lambda, "lambda in [0, 1]"));
        }
        if self.thresholds.theta_pos <= 0.0 || self.thresholds.theta_pos.is_nan() {
            return Err(err("thresholds.theta_pos", self.thresholds.theta_pos, "theta_pos > 0"));
        }
        if self.thresholds.theta_neg >= 0.0 || self.thresholds.theta_neg.is_nan() {
            return Err(err("thresholds.theta_neg", self.thresholds.theta_neg, "theta_neg < 0"));
        }
        if self.phi_list.is_empty() {
            return Err(err("phi_list", "empty", "at least one window size >= 2"));
        }
        if let Some(bad) = self.phi_list.iter().find(|phi| **phi < 2) {
            return Err(err("phi_list", bad, "every window size >= 2"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(err("significance", self.significance, "significance in (0, 1)"));
        }
        if !(self.rho_level > 0.0 && self.rho_level < 100.0) {
            return Err(err("rho_level", self.rho_level, "rho_level in (0, 100)"));
        }
        if self.bootstrap_b < 200 {
            return Err(err("bootstrap_b", self.bootstrap_b, "bootstrap_b >= 200"));
        }
        if self.min_aligned < 3 {
            return Err(err("min_aligned", self.min_aligned, "min_aligned >= 3"));
        }
        Ok(())
    }
}
