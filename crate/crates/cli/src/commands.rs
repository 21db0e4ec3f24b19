//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use outrel_core::index::build_index;
use outrel_core::ingest::{load_series, IngestReport};
use outrel_core::pipeline::{
    self, evaluate, export_scatter, run_discovery, timing_report, PairLabel, RunReport,
    TimingReport,
};
use outrel_core::scoring::{cumulative_scores, dominant_scores};
use outrel_core::series::AttributeSeries;
use outrel_core::{ExclusionPolicy, PodsParams, Representation};

use crate::config::{load_config, Config};
use crate::scorefile::{read_score_file, write_score_file, ScoreFile};
use crate::{
    BenchArgs, CliError, DiscoverArgs, EvalArgs, ExportScatterArgs, IndexArgs, ScoreArgs,
};

fn write_output(path: Option<&Path>, payload: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| {
                        CliError::data(format!("cannot create {}: {e}", parent.display()))
                    })?;
                }
            }
            std::fs::write(path, payload)
                .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))
}

fn ingest_all(config: &Config) -> Result<(Vec<AttributeSeries>, Vec<IngestReport>), CliError> {
    if config.inputs.is_empty() {
        return Err(CliError::usage("config declares no inputs"));
    }
    let mut series = Vec::new();
    let mut reports = Vec::new();
    for input in &config.inputs {
        let ingested = load_series(&input.path, &input.schema())
            .map_err(|e| CliError::data(e.to_string()))?;
        series.extend(ingested.series);
        reports.push(ingested.report);
    }
    Ok((series, reports))
}

fn apply_score_overrides(params: &mut PodsParams, args: &ScoreArgs) -> Result<(), CliError> {
    if !args.phi.is_empty() {
        params.phi_list = args.phi.clone();
    }
    if let Some(lambda) = args.lambda {
        params.lambda = lambda;
    }
    if let Some(theta_pos) = args.theta_pos {
        params.thresholds.theta_pos = theta_pos;
    }
    if let Some(theta_neg) = args.theta_neg {
        params.thresholds.theta_neg = theta_neg;
    }
    params.validate().map_err(|e| CliError::usage(e.to_string()))
}

/// Score every configured attribute at every window size and write one
/// score file per (attribute, window) plus the ingest reports.
pub fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    apply_score_overrides(&mut config.params, args)?;
    let (series, ingest_reports) = ingest_all(&config)?;

    let out_dir = args.out_dir.clone().unwrap_or_else(|| config.output.dir.join("scores"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;

    let registry = pipeline::registry_for(&config.params);
    let function = registry
        .get(&config.params.psi)
        .map_err(|e| CliError::usage(e.to_string()))?;

    let mut written = Vec::new();
    let mut skipped = Vec::new();
    for s in &series {
        for &phi in &config.params.phi_list {
            let initial = match function.score(s, phi, config.params.thresholds) {
                Ok(rep) => rep,
                Err(e) => {
                    skipped.push(format!("{}@{phi}: {e}", s.id()));
                    continue;
                }
            };
            let cumulative = cumulative_scores(&initial, config.params.lambda, config.params.gap_decay)
                .map_err(|e| CliError::data(e.to_string()))?;
            let dominant =
                dominant_scores(&initial, &cumulative).map_err(|e| CliError::data(e.to_string()))?;
            let file = ScoreFile { initial, cumulative, dominant };
            written.push(write_score_file(&out_dir, &file)?);
        }
    }

    for report in &ingest_reports {
        let stem = Path::new(&report.file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".into());
        let path = out_dir.join(format!("ingest__{stem}.json"));
        std::fs::write(&path, to_json(report)?)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }

    let summary = json!({
        "score_files": written,
        "ingest_reports": ingest_reports,
        "skipped": skipped,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("valid json"));
    Ok(())
}

fn parse_exclusion(raw: &str) -> Result<ExclusionPolicy, CliError> {
    match raw {
        "same_attribute" => Ok(ExclusionPolicy::SameAttribute),
        "none" => Ok(ExclusionPolicy::None),
        other => Err(CliError::usage(format!(
            "unknown exclusion policy {other:?} (expected same_attribute or none)"
        ))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexSnapshot {
    postings: BTreeMap<String, Vec<String>>,
    catalog: BTreeMap<String, PathBuf>,
    pruning: outrel_core::index::PruningReport,
}

/// Build the alignment index over previously written score files and emit
/// a snapshot plus the pruning report.
pub fn index(args: &IndexArgs) -> Result<(), CliError> {
    let exclusion = parse_exclusion(&args.exclusion)?;
    let mut files = Vec::new();
    for given in &args.scores {
        if given.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(given)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", given.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(given.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::usage("no score files given"));
    }

    let mut reps: Vec<(Representation, PathBuf)> = Vec::new();
    for path in files {
        let score_file = read_score_file(&path)?;
        reps.push((score_file.dominant, path));
    }
    let catalog: BTreeMap<String, PathBuf> =
        reps.iter().map(|(rep, path)| (rep.id(), path.clone())).collect();
    let index = build_index(reps.into_iter().map(|(rep, _)| rep))
        .map_err(|e| CliError::data(e.to_string()))?;

    let snapshot = IndexSnapshot {
        postings: index
            .postings()
            .iter()
            .map(|(ts, ids)| (ts.to_string(), ids.iter().cloned().collect()))
            .collect(),
        catalog,
        pruning: index.pruning_report(exclusion),
    };
    write_output(args.out.as_deref(), &to_json(&snapshot)?)
}

/// Run the whole discovery pipeline from the config and emit the run
/// report.
pub fn discover(args: &DiscoverArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let (series, _) = ingest_all(&config)?;
    let report = run_discovery(&series, &config.params).map_err(CliError::from_pipeline)?;
    write_output(args.out.as_deref(), &to_json(&report)?)
}

fn parse_labels(path: &Path) -> Result<Vec<PairLabel>, CliError> {
    let bad = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let (a, b, verdict) = match (record.get(0), record.get(1), record.get(2)) {
            (Some(a), Some(b), Some(v)) => (a.trim(), b.trim(), v.trim()),
            _ => return Err(bad(format!("label row needs 3 fields, got {record:?}"))),
        };
        let positive = match verdict.to_ascii_lowercase().as_str() {
            "positive" => true,
            "negative" => false,
            other => return Err(bad(format!("label must be positive or negative, got {other:?}"))),
        };
        labels.push(PairLabel::new(a, b, positive));
    }
    if labels.is_empty() {
        return Err(bad("no labels".into()));
    }
    Ok(labels)
}

/// Score a discovery report against a labels file.
pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.records)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.records.display())))?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", args.records.display())))?;
    let labels = parse_labels(&args.labels)?;
    let metrics = evaluate(&report.records, &labels).map_err(CliError::from_pipeline)?;
    write_output(args.out.as_deref(), &to_json(&metrics)?)
}

#[derive(Debug, Serialize)]
struct BenchReport {
    with_index: TimingReport,
    without_index: TimingReport,
    speedup: f64,
}

/// Time the pair-evaluation phase with and without the alignment index.
pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let (series, _) = ingest_all(&config)?;
    let with_index =
        timing_report(&series, &config.params, true).map_err(CliError::from_pipeline)?;
    let without_index =
        timing_report(&series, &config.params, false).map_err(CliError::from_pipeline)?;
    if with_index.meaningful_pairs != without_index.meaningful_pairs {
        return Err(CliError::data(
            "detected sets diverged between indexed and exhaustive runs",
        ));
    }
    let speedup = without_index.elapsed_ms / with_index.elapsed_ms.max(f64::EPSILON);
    let report = BenchReport { with_index, without_index, speedup };
    write_output(args.out.as_deref(), &to_json(&report)?)
}

/// Emit one pair's aligned scores with outlier flags and weights.
pub fn scatter(args: &ExportScatterArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let (series, _) = ingest_all(&config)?;
    let registry = pipeline::registry_for(&config.params);
    let (initial, _) = pipeline::score_attributes(&series, &config.params, &registry)
        .map_err(CliError::from_pipeline)?;

    let mut dominants = BTreeMap::new();
    for rep in &initial {
        let dominant =
            pipeline::to_dominant(rep, &config.params).map_err(|e| CliError::data(e.to_string()))?;
        dominants.insert(dominant.id(), dominant);
    }
    let lookup = |id: &str| {
        dominants.get(id).ok_or_else(|| {
            let known: Vec<&String> = dominants.keys().collect();
            CliError::usage(format!("unknown representation {id:?}; available: {known:?}"))
        })
    };
    let a = lookup(&args.rep_a)?;
    let b = lookup(&args.rep_b)?;
    let rows = export_scatter(a, b, config.params.alpha)
        .map_err(|e| CliError::data(e.to_string()))?;

    let mut out = String::from("timestamp,u1,u2,is_aligned_outlier,weight\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.timestamp, row.u1, row.u2, row.is_aligned_outlier, row.weight
        ));
    }
    match args.out.as_deref() {
        Some(path) => std::fs::write(path, out)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
