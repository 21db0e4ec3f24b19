//! Discovery of statistically meaningful relationships between aligned
//! outliers in temporal attribute series.
//!
//! The library turns raw timestamped series into outlier-score
//! representations, prunes attribute pairs through an inverted alignment
//! index, fits outlier-biased weighted linear regressions over the aligned
//! scores of the surviving pairs, and verifies whether the aligned outliers
//! are predictable from the fitted trend.
//!
//! The stages are exposed both as standalone modules and as a single
//! [`pipeline::run_discovery`] entry point:
//!
//! * [`ingest`] — delimited-file loading, timestamp normalization and
//!   aggregation to a configured granularity.
//! * [`scoring`] — windowed mean-residual scores, exponential-decay
//!   cumulative scores, dominant scores, and outlier classification.
//!   Initial scoring functions are pluggable through
//!   [`scoring::ScoreRegistry`].
//! * [`index`] — the timestamp-to-representations inverted index used to
//!   enumerate candidate pairs that share at least one aligned outlier.
//! * [`trend`] — outlier-biased weighting and the two weighted linear
//!   regressions (each direction) with the slope significance test.
//! * [`meaningfulness`] — goodness-of-fit and bootstrap-percentile
//!   consistency checks over the aligned-outlier errors.
//! * [`pipeline`] — orchestration, discovery records, evaluation metrics,
//!   timing reports, and the parameter-sensitivity sweep.
//! * [`config`] — validated run parameters with their documented defaults.

pub mod config;
pub mod index;
pub mod ingest;
pub mod meaningfulness;
pub mod pipeline;
pub mod scoring;
pub mod series;
pub mod trend;

pub use config::PodsParams;
pub use index::{AlignmentIndex, CandidatePair, ExclusionPolicy};
pub use pipeline::{DiscoveryRecord, RunReport};
pub use scoring::{Representation, ScoreKind, Thresholds};
pub use series::{AttributeSeries, Granularity, Timestamp};
