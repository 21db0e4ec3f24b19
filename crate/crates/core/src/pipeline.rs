//! Orchestration of a discovery run.
//!
//! Attributes are scored into dominant representations, the alignment index
//! enumerates candidate pairs, and each pair is evaluated independently:
//! fit both trend directions, then verify meaningfulness against the first
//! direction whose slope test rejected, falling back to the second when the
//! first did not establish it. Per-pair failures are recorded in the pair's
//! own record and never abort the batch.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ParamError, PodsParams};
use crate::index::{AlignmentIndex, IndexError, PruningReport};
use crate::meaningfulness::{
    verify_meaningfulness, MeaningfulnessError, MeaningfulnessVerdict, VerificationParams,
};
use crate::scoring::{
    cumulative_scores, dominant_scores, MeanResidual, Representation, ScoreRegistry, ScoringError,
};
use crate::series::{AttributeSeries, Timestamp};
use crate::trend::{detect_data_trend, AlignedSample, Direction, TrendError, TrendModel};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error("discovery needs at least 2 attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("label references pair ({0}, {1}) absent from the records")]
    UnknownLabeledPair(String, String),
}

/// Slim view of a fitted model for reports; residual vectors stay out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModelSummary {
    pub direction: Direction,
    pub slope: f64,
    pub intercept: f64,
    pub slope_p_value: f64,
    pub adjusted_r2: f64,
    pub weighted: bool,
    pub n: usize,
}

impl From<&TrendModel> for TrendModelSummary {
    fn from(m: &TrendModel) -> Self {
        TrendModelSummary {
            direction: m.direction,
            slope: m.slope,
            intercept: m.intercept,
            slope_p_value: m.slope_p_value,
            adjusted_r2: m.adjusted_r2,
            weighted: m.weighted,
            n: m.n,
        }
    }
}

/// One direction's outcome inside a pair's record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub model: Option<TrendModelSummary>,
    /// Why no model could be fitted.
    pub skipped: Option<String>,
    pub slope_rejected: bool,
    /// Present only when this direction's verification actually ran.
    pub verification: Option<MeaningfulnessVerdict>,
    /// Why verification could not run although the slope test rejected.
    pub verification_error: Option<String>,
}

impl DirectionReport {
    fn skipped(reason: String) -> Self {
        DirectionReport {
            model: None,
            skipped: Some(reason),
            slope_rejected: false,
            verification: None,
            verification_error: None,
        }
    }
}

/// Verdict for one representation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryRecord {
    pub rep_a: String,
    pub rep_b: String,
    pub n_aligned: usize,
    pub n_aligned_outliers: usize,
    pub f1: DirectionReport,
    pub f2: DirectionReport,
    pub trend_found: bool,
    pub meaningful: bool,
    /// Which direction established meaningfulness, when any did.
    pub established_by: Option<Direction>,
    pub elapsed_micros: u64,
}

/// Everything a discovery run produced, ready for serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub params: PodsParams,
    pub corpus_digest: String,
    pub n_series: usize,
    pub n_representations: usize,
    /// Representations that could not be scored (window too large for the
    /// series, constant data, ...), as `id: reason` notes.
    pub scoring_skipped: Vec<String>,
    pub pruning: PruningReport,
    pub records: Vec<DiscoveryRecord>,
    pub elapsed_ms: f64,
}

impl RunReport {
    pub fn meaningful_pairs(&self) -> Vec<(String, String)> {
        self.records
            .iter()
            .filter(|r| r.meaningful)
            .map(|r| (r.rep_a.clone(), r.rep_b.clone()))
            .collect()
    }
}

// 64-bit FNV-1a; stable across platforms and releases, unlike the standard
// library's default hasher.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for one (pair, direction) verification, independent of evaluation
/// order so parallel and threshold-swept runs draw identical resamples.
fn derive_seed(root: u64, rep_a: &str, rep_b: &str, direction: Direction) -> u64 {
    let tag = match direction {
        Direction::U2OnU1 => 0x1,
        Direction::U1OnU2 => 0x2,
    };
    let mut key = Vec::with_capacity(rep_a.len() + rep_b.len() + 1);
    key.extend_from_slice(rep_a.as_bytes());
    key.push(0);
    key.extend_from_slice(rep_b.as_bytes());
    splitmix64(root ^ fnv1a64(&key) ^ (tag << 56))
}

/// Digest of a corpus for run metadata, so reports name their input.
pub fn corpus_digest(series: &[AttributeSeries]) -> String {
    let mut hash = 0xcbf29ce484222325u64;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    for s in series {
        feed(s.id().as_bytes());
        for (ts, v) in s.points() {
            feed(ts.to_string().as_bytes());
            feed(&v.to_bits().to_le_bytes());
        }
    }
    format!("{hash:016x}")
}

/// Registry matching the run parameters' scoring settings.
pub fn registry_for(params: &PodsParams) -> ScoreRegistry {
    let mut registry = ScoreRegistry::with_builtins();
    registry.register(Arc::new(MeanResidual { population_sd: params.population_sd }));
    registry
}

/// Initial representations for every (attribute, window) combination.
/// Combinations that cannot be scored are skipped with a note.
pub fn score_attributes(
    series: &[AttributeSeries],
    params: &PodsParams,
    registry: &ScoreRegistry,
) -> Result<(Vec<Representation>, Vec<String>), PipelineError> {
    let function = registry.get(&params.psi)?;
    let results: Vec<(String, Result<Representation, ScoringError>)> = series
        .par_iter()
        .flat_map_iter(|s| {
            let function = &function;
            params.phi_list.iter().map(move |phi| {
                (
                    format!("{}@{}", s.id(), phi),
                    function.score(s, *phi, params.thresholds),
                )
            })
        })
        .collect();

    let mut reps = Vec::new();
    let mut skipped = Vec::new();
    for (id, result) in results {
        match result {
            Ok(rep) => reps.push(rep),
            Err(e) => skipped.push(format!("{id}: {e}")),
        }
    }
    Ok((reps, skipped))
}

/// Dominant representation of one initial representation under the run's
/// cumulative-score settings.
pub fn to_dominant(
    initial: &Representation,
    params: &PodsParams,
) -> Result<Representation, ScoringError> {
    let cumulative = cumulative_scores(initial, params.lambda, params.gap_decay)?;
    dominant_scores(initial, &cumulative)
}

fn evaluate_pair(
    a: &Representation,
    b: &Representation,
    params: &PodsParams,
) -> Result<DiscoveryRecord, TrendError> {
    let started = Instant::now();
    let (id_a, id_b) = (a.id(), b.id());
    let sample = AlignedSample::from_representations(a, b, params.alpha)?;
    let detection = detect_data_trend(&sample, params.significance, params.min_aligned);

    let mut f1 = direction_report(&detection.f1);
    let mut f2 = direction_report(&detection.f2);
    let mut meaningful = false;
    let mut established_by = None;

    let verify = |model: &TrendModel,
                  report: &mut DirectionReport,
                  direction: Direction|
     -> bool {
        let vp = VerificationParams {
            r2_min: params.r2_min,
            beta: params.beta,
            rho_level: params.rho_level,
            bootstrap_resamples: params.bootstrap_b,
            seed: derive_seed(params.seed, &id_a, &id_b, direction),
            percentile_rule: params.percentile_rule,
        };
        match verify_meaningfulness(model, &sample, &vp) {
            Ok(verdict) => {
                let ok = verdict.meaningful;
                report.verification = Some(verdict);
                ok
            }
            Err(e @ MeaningfulnessError::NoAlignedOutliers) => {
                report.verification_error = Some(e.to_string());
                false
            }
            Err(e) => {
                report.verification_error = Some(e.to_string());
                false
            }
        }
    };

    if let Ok((model, test)) = &detection.f1 {
        if test.reject && verify(model, &mut f1, Direction::U2OnU1) {
            meaningful = true;
            established_by = Some(Direction::U2OnU1);
        }
    }
    if !meaningful {
        if let Ok((model, test)) = &detection.f2 {
            if test.reject && verify(model, &mut f2, Direction::U1OnU2) {
                meaningful = true;
                established_by = Some(Direction::U1OnU2);
            }
        }
    }

    Ok(DiscoveryRecord {
        rep_a: id_a,
        rep_b: id_b,
        n_aligned: sample.len(),
        n_aligned_outliers: sample.n_aligned_outliers(),
        f1,
        f2,
        trend_found: detection.trend_found(),
        meaningful,
        established_by,
        elapsed_micros: started.elapsed().as_micros() as u64,
    })
}

fn direction_report(
    outcome: &Result<(TrendModel, crate::trend::SlopeTest), TrendError>,
) -> DirectionReport {
    match outcome {
        Ok((model, test)) => DirectionReport {
            model: Some(TrendModelSummary::from(model)),
            skipped: None,
            slope_rejected: test.reject,
            verification: None,
            verification_error: None,
        },
        Err(e) => DirectionReport::skipped(e.to_string()),
    }
}

/// Outcome of evaluating a fixed set of representations.
#[derive(Debug, Clone)]
pub struct Discovery {
    pub records: Vec<DiscoveryRecord>,
    pub pruning: PruningReport,
    pub index: AlignmentIndex,
}

/// Derive cumulative and dominant scores for every initial representation
/// and build the alignment index over them, in the same pass.
pub fn prepare_index(
    initial: &[Representation],
    params: &PodsParams,
) -> Result<AlignmentIndex, PipelineError> {
    params.validate()?;
    let mut index = AlignmentIndex::new();
    for rep in initial {
        index.insert(to_dominant(rep, params)?)?;
    }
    Ok(index)
}

/// Evaluate pairs over a prepared index: the co-posted candidates, or every
/// non-excluded pair when `use_index` is off. The detected set is the same
/// either way, only slower.
pub fn evaluate_pairs(
    index: &AlignmentIndex,
    params: &PodsParams,
    use_index: bool,
) -> Result<Vec<DiscoveryRecord>, PipelineError> {
    let pairs: Vec<(String, String)> = if use_index {
        index
            .candidate_pairs(params.exclusion)
            .into_iter()
            .map(|p| (p.rep_a, p.rep_b))
            .collect()
    } else {
        index.all_pairs(params.exclusion)
    };

    pairs
        .par_iter()
        .map(|(id_a, id_b)| {
            let a = index.get(id_a).expect("pair ids come from the catalog");
            let b = index.get(id_b).expect("pair ids come from the catalog");
            evaluate_pair(a, b, params).map_err(PipelineError::from)
        })
        .collect()
}

/// Run cumulative and dominant scoring over externally supplied initial
/// representations, then evaluate candidate pairs. This is the entry point
/// when scores come from a scoring function outside this crate.
pub fn discover_from_representations(
    initial: &[Representation],
    params: &PodsParams,
    use_index: bool,
) -> Result<Discovery, PipelineError> {
    let index = prepare_index(initial, params)?;
    let pruning = index.pruning_report(params.exclusion);
    let records = evaluate_pairs(&index, params, use_index)?;
    Ok(Discovery { records, pruning, index })
}

/// Full discovery over raw series: score every (attribute, window), derive
/// dominant representations, prune through the alignment index, and
/// evaluate the surviving pairs.
pub fn run_discovery(
    series: &[AttributeSeries],
    params: &PodsParams,
) -> Result<RunReport, PipelineError> {
    run_discovery_with_registry(series, params, &registry_for(params))
}

/// As [`run_discovery`], with a caller-supplied scoring registry.
pub fn run_discovery_with_registry(
    series: &[AttributeSeries],
    params: &PodsParams,
    registry: &ScoreRegistry,
) -> Result<RunReport, PipelineError> {
    params.validate()?;
    if series.len() < 2 {
        return Err(PipelineError::TooFewAttributes(series.len()));
    }
    let started = Instant::now();
    let (initial, scoring_skipped) = score_attributes(series, params, registry)?;
    let discovery = discover_from_representations(&initial, params, true)?;
    Ok(RunReport {
        params: params.clone(),
        corpus_digest: corpus_digest(series),
        n_series: series.len(),
        n_representations: initial.len(),
        scoring_skipped,
        pruning: discovery.pruning,
        records: discovery.records,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Ground-truth label for one representation pair, id-order canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabel {
    pub rep_a: String,
    pub rep_b: String,
    pub positive: bool,
}

impl PairLabel {
    pub fn new(a: impl Into<String>, b: impl Into<String>, positive: bool) -> Self {
        let (a, b) = (a.into(), b.into());
        let (rep_a, rep_b) = if a <= b { (a, b) } else { (b, a) };
        PairLabel { rep_a, rep_b, positive }
    }
}

/// Precision, recall and F-measure of a record set against labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

/// Score the records' meaningful verdicts against labeled pairs. Unlabeled
/// records are ignored; a label which matches no record is an error. A
/// zero-denominator precision or recall counts as 1, and F is 0 when both
/// are 0.
pub fn evaluate(records: &[DiscoveryRecord], labels: &[PairLabel]) -> Result<Metrics, PipelineError> {
    let verdicts: BTreeMap<(&str, &str), bool> = records
        .iter()
        .map(|r| ((r.rep_a.as_str(), r.rep_b.as_str()), r.meaningful))
        .collect();

    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for label in labels {
        let detected = verdicts
            .get(&(label.rep_a.as_str(), label.rep_b.as_str()))
            .copied()
            .ok_or_else(|| {
                PipelineError::UnknownLabeledPair(label.rep_a.clone(), label.rep_b.clone())
            })?;
        match (label.positive, detected) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }

    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        precision,
        recall,
        f_measure,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

/// Wall-clock cost of the pair-evaluation phase over prepared
/// representations, with or without index pruning. Scoring is excluded so
/// the two strategies are compared on the work the index actually saves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReport {
    pub with_index: bool,
    pub elapsed_ms: f64,
    pub n_pairs_evaluated: usize,
    pub pruned_fraction: f64,
    pub meaningful_pairs: Vec<(String, String)>,
}

/// Time the pair phase over raw series (scored outside the clock).
pub fn timing_report(
    series: &[AttributeSeries],
    params: &PodsParams,
    with_index: bool,
) -> Result<TimingReport, PipelineError> {
    params.validate()?;
    let (initial, _) = score_attributes(series, params, &registry_for(params))?;
    timing_report_from_representations(&initial, params, with_index)
}

/// Time the pair phase over prepared initial representations. Scoring and
/// index construction happen outside the clock: the index is built as a
/// by-product of scoring either way, so only the pair work separates the
/// two strategies.
pub fn timing_report_from_representations(
    initial: &[Representation],
    params: &PodsParams,
    with_index: bool,
) -> Result<TimingReport, PipelineError> {
    let index = prepare_index(initial, params)?;
    let pruning = index.pruning_report(params.exclusion);

    let started = Instant::now();
    let records = evaluate_pairs(&index, params, with_index)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    Ok(TimingReport {
        with_index,
        elapsed_ms,
        n_pairs_evaluated: records.len(),
        pruned_fraction: pruning.pruned_fraction,
        meaningful_pairs: records
            .iter()
            .filter(|r| r.meaningful)
            .map(|r| (r.rep_a.clone(), r.rep_b.clone()))
            .collect(),
    })
}

/// One row of a scatter export: everything needed to plot a pair's aligned
/// scores elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub timestamp: Timestamp,
    pub u1: f64,
    pub u2: f64,
    pub is_aligned_outlier: bool,
    pub weight: f64,
}

/// Aligned scores of one pair with masks and weights, for external
/// plotting.
pub fn export_scatter(
    a: &Representation,
    b: &Representation,
    alpha: f64,
) -> Result<Vec<ScatterRow>, TrendError> {
    let sample = AlignedSample::from_representations(a, b, alpha)?;
    Ok(sample
        .points
        .iter()
        .zip(&sample.outlier_mask)
        .zip(&sample.weights)
        .map(|((p, mask), weight)| ScatterRow {
            timestamp: p.timestamp,
            u1: p.u1,
            u2: p.u2,
            is_aligned_outlier: *mask,
            weight: *weight,
        })
        .collect())
}

/// Value grids for the parameter-sensitivity sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrids {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub r2_min: Vec<f64>,
}

impl Default for SweepGrids {
    fn default() -> Self {
        // Variations around the defaults: alpha on a 1e-2 scale, the rest
        // on a 1e-1 scale, clipped to their legal ranges.
        SweepGrids {
            alpha: vec![0.46, 0.48, 0.5, 0.52, 0.54],
            beta: vec![0.5, 0.57, 0.67, 0.77, 0.87, 0.97],
            lambda: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            r2_min: vec![0.05, 0.15, 0.25, 0.35, 0.45, 0.55],
        }
    }
}

/// F-measure (and friends) at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub metrics: Metrics,
}

/// Re-run discovery over the same initial representations at every grid
/// point, evaluating each run against the labels. The seed is held fixed,
/// so beta and r2_min rows re-threshold identical fitted records.
pub fn sensitivity_sweep(
    initial: &[Representation],
    base: &PodsParams,
    labels: &[PairLabel],
    grids: &SweepGrids,
) -> Result<Vec<SweepPoint>, PipelineError> {
    let mut out = Vec::new();
    let mut run = |parameter: &str, value: f64, params: PodsParams| -> Result<(), PipelineError> {
        let discovery = discover_from_representations(initial, &params, true)?;
        let metrics = evaluate(&discovery.records, labels)?;
        out.push(SweepPoint { parameter: parameter.to_string(), value, metrics });
        Ok(())
    };

    for &alpha in &grids.alpha {
        run("alpha", alpha, PodsParams { alpha, ..base.clone() })?;
    }
    for &beta in &grids.beta {
        run("beta", beta, PodsParams { beta, ..base.clone() })?;
    }
    for &lambda in &grids.lambda {
        run("lambda", lambda, PodsParams { lambda, ..base.clone() })?;
    }
    for &r2_min in &grids.r2_min {
        run("r2_min", r2_min, PodsParams { r2_min, ..base.clone() })?;
    }
    Ok(out)
}
