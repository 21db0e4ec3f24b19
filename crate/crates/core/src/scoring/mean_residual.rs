//! Windowed mean-residual scores: each value standardized against the mean
//! and standard deviation of the observations immediately preceding it.

use std::collections::BTreeMap;

use crate::series::AttributeSeries;

use super::{Representation, ScoreFunction, ScoreKind, ScoringError, Thresholds};

/// The default initial scoring function. Small windows surface local
/// anomalies, large windows global peaks and valleys; running several window
/// sizes over the same attribute yields one representation each.
///
/// Windows are counted in observed points, so calendar gaps do not shrink
/// the reference sample. Timestamps without a full preceding window, or
/// whose window has zero spread, are omitted rather than scored.
#[derive(Debug, Clone)]
pub struct MeanResidual {
    /// Divide the window variance by its size (population form, the
    /// default) or by size minus one.
    pub population_sd: bool,
}

impl Default for MeanResidual {
    fn default() -> Self {
        MeanResidual { population_sd: true }
    }
}

impl ScoreFunction for MeanResidual {
    fn name(&self) -> &'static str {
        "mean_residual"
    }

    fn score(
        &self,
        series: &AttributeSeries,
        window: usize,
        thresholds: Thresholds,
    ) -> Result<Representation, ScoringError> {
        if window < 2 {
            return Err(ScoringError::WindowTooSmall(window));
        }
        let points = series.points();
        if points.len() <= window {
            return Err(ScoringError::TooFewPoints {
                id: series.id().to_string(),
                n_points: points.len(),
                window,
            });
        }

        let divisor = if self.population_sd { window } else { window - 1 } as f64;
        let mut scores = BTreeMap::new();
        for i in window..points.len() {
            let preceding = &points[i - window..i];
            let mean = preceding.iter().map(|(_, v)| v).sum::<f64>() / window as f64;
            let var = preceding.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / divisor;
            let sd = var.sqrt();
            if sd > 0.0 {
                let (ts, value) = points[i];
                scores.insert(ts, (value - mean) / sd);
            }
        }

        Ok(Representation {
            attr_id: series.id().to_string(),
            kind: ScoreKind::MeanResidual,
            window_phi: Some(window),
            lambda: None,
            scores,
            thresholds,
        })
    }
}

/// Score a series with the default population-deviation mean residuals.
pub fn mean_residuals(
    series: &AttributeSeries,
    window: usize,
    thresholds: Thresholds,
) -> Result<Representation, ScoringError> {
    MeanResidual::default().score(series, window, thresholds)
}
