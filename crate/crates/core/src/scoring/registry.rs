//! Name-keyed registry of initial scoring functions.
//!
//! Any function that maps raw values to scores whose larger magnitudes mean
//! more severe outliers can drive the rest of the pipeline. Implementations
//! are registered by name and selected at runtime through the `psi`
//! configuration key or the corresponding CLI flag.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::series::AttributeSeries;

use super::{MeanResidual, Representation, ScoringError, Thresholds};

/// An initial outlier scoring function.
///
/// `window` is the number of preceding observations the function may use as
/// its reference sample; functions with no windowing are free to ignore it.
pub trait ScoreFunction: Send + Sync {
    fn name(&self) -> &'static str;

    fn score(
        &self,
        series: &AttributeSeries,
        window: usize,
        thresholds: Thresholds,
    ) -> Result<Representation, ScoringError>;
}

/// Registry of scoring functions, keyed by name.
pub struct ScoreRegistry {
    entries: BTreeMap<&'static str, Arc<dyn ScoreFunction>>,
}

impl ScoreRegistry {
    pub fn empty() -> Self {
        ScoreRegistry { entries: BTreeMap::new() }
    }

    /// Registry with the built-in functions under their default settings.
    pub fn with_builtins() -> Self {
        let mut registry = ScoreRegistry::empty();
        registry.register(Arc::new(MeanResidual::default()));
        registry
    }

    /// Insert or replace a function under its own name.
    pub fn register(&mut self, function: Arc<dyn ScoreFunction>) {
        self.entries.insert(function.name(), function);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ScoreFunction>, ScoringError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| ScoringError::UnknownFunction(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for ScoreRegistry {
    fn default() -> Self {
        ScoreRegistry::with_builtins()
    }
}
