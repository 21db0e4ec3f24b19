//! Loading delimited files into attribute series.
//!
//! Rows are parsed against a schema, their timestamps normalized to UTC and
//! truncated to the configured granularity, and the values of each
//! configured attribute aggregated per truncated timestamp. Malformed rows
//! are skipped and counted instead of aborting the load; open-data files
//! routinely contain a few.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::Representation;
use crate::series::{AttributeSeries, Granularity, SeriesError, Timestamp};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed delimited data in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column {column:?} in header")]
    MissingColumn { path: String, column: String },
    #[error("{path}: attribute {attribute:?} needs a source column for aggregator {aggregator:?}")]
    MissingSourceColumn {
        path: String,
        attribute: String,
        aggregator: Aggregator,
    },
    #[error("{path}: no rows survived ingestion")]
    EmptyResult { path: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// How the raw rows that fall into one timestamp bucket become one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Sum,
    Mean,
    Count,
}

/// One attribute to extract: its output name, the column it reads (counting
/// rows needs none), and the aggregation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default)]
    pub column: Option<String>,
    pub aggregator: Aggregator,
}

/// Schema for one delimited input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSchema {
    /// Prefix for attribute ids (`dataset.attribute`); defaults to the file
    /// stem.
    #[serde(default)]
    pub dataset: Option<String>,
    pub timestamp_column: String,
    pub timestamp_format: String,
    pub attributes: Vec<AttributeSpec>,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

/// Per-attribute summary in the ingest report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub id: String,
    pub n_points: usize,
    pub t_min: Option<Timestamp>,
    pub t_max: Option<Timestamp>,
}

/// What happened while loading one file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub file: String,
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub attributes: Vec<AttributeSummary>,
}

/// Series loaded from one file together with its report.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: Vec<AttributeSeries>,
    pub report: IngestReport,
}

/// Load and aggregate every configured attribute from a delimited file with
/// a header row. A row is rejected — counted, not fatal — when its timestamp
/// does not parse or any attribute's source column holds a non-numeric
/// value.
pub fn load_series(path: impl AsRef<Path>, schema: &IngestSchema) -> Result<Ingested, IngestError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => IngestError::Csv { path: path_str.clone(), source: e },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv { path: path_str.clone(), source: e })?
        .clone();
    let column_index = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                path: path_str.clone(),
                column: name.to_string(),
            })
    };

    let ts_idx = column_index(&schema.timestamp_column)?;
    let mut value_indices = Vec::with_capacity(schema.attributes.len());
    for attr in &schema.attributes {
        let idx = match (&attr.column, attr.aggregator) {
            (Some(col), _) => Some(column_index(col)?),
            (None, Aggregator::Count) => None,
            (None, aggregator) => {
                return Err(IngestError::MissingSourceColumn {
                    path: path_str.clone(),
                    attribute: attr.name.clone(),
                    aggregator,
                })
            }
        };
        value_indices.push(idx);
    }

    let dataset = schema.dataset.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".to_string())
    });

    // Per attribute: timestamp -> (sum, row count).
    let mut buckets: Vec<BTreeMap<Timestamp, (f64, usize)>> =
        vec![BTreeMap::new(); schema.attributes.len()];
    let mut rows_read = 0usize;
    let mut rows_rejected = 0usize;

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                rows_read += 1;
                rows_rejected += 1;
                continue;
            }
        };
        rows_read += 1;

        let ts = match record.get(ts_idx).map(|raw| {
            Timestamp::parse_with_format(raw, &schema.timestamp_format, schema.granularity)
        }) {
            Some(Ok(ts)) => ts,
            _ => {
                rows_rejected += 1;
                continue;
            }
        };

        // Parse every needed value before committing anything, so a bad
        // row never contributes partially.
        let mut parsed = Vec::with_capacity(schema.attributes.len());
        let mut ok = true;
        for idx in &value_indices {
            match idx {
                None => parsed.push(1.0),
                Some(i) => match record.get(*i).map(|raw| raw.trim().parse::<f64>()) {
                    Some(Ok(v)) if v.is_finite() => parsed.push(v),
                    _ => {
                        ok = false;
                        break;
                    }
                },
            }
        }
        if !ok {
            rows_rejected += 1;
            continue;
        }

        for (bucket, v) in buckets.iter_mut().zip(&parsed) {
            let entry = bucket.entry(ts).or_insert((0.0, 0));
            entry.0 += v;
            entry.1 += 1;
        }
    }

    let mut series = Vec::with_capacity(schema.attributes.len());
    let mut summaries = Vec::with_capacity(schema.attributes.len());
    for (attr, bucket) in schema.attributes.iter().zip(buckets) {
        let id = format!("{dataset}.{}", attr.name);
        let points: Vec<(Timestamp, f64)> = bucket
            .into_iter()
            .map(|(ts, (sum, n))| {
                let value = match attr.aggregator {
                    Aggregator::Sum => sum,
                    Aggregator::Mean => sum / n as f64,
                    Aggregator::Count => n as f64,
                };
                (ts, value)
            })
            .collect();
        summaries.push(AttributeSummary {
            id: id.clone(),
            n_points: points.len(),
            t_min: points.first().map(|(t, _)| *t),
            t_max: points.last().map(|(t, _)| *t),
        });
        series.push(AttributeSeries::new(id, points)?);
    }

    if series.iter().all(|s| s.is_empty()) {
        return Err(IngestError::EmptyResult { path: path_str });
    }

    Ok(Ingested {
        series,
        report: IngestReport {
            file: path_str,
            rows_read,
            rows_rejected,
            attributes: summaries,
        },
    })
}

/// Pairs of scores from two representations that share a timestamp, in
/// timestamp order. Exactly the key intersection: nothing invented, nothing
/// dropped.
pub fn inner_join_timestamps(
    a: &Representation,
    b: &Representation,
) -> Vec<(Timestamp, f64, f64)> {
    let mut left = a.scores.iter();
    let mut right = b.scores.iter();
    let mut out = Vec::new();
    let (mut la, mut rb) = (left.next(), right.next());
    while let (Some((ta, ua)), Some((tb, ub))) = (la, rb) {
        match ta.cmp(tb) {
            std::cmp::Ordering::Less => la = left.next(),
            std::cmp::Ordering::Greater => rb = right.next(),
            std::cmp::Ordering::Equal => {
                out.push((*ta, *ua, *ub));
                la = left.next();
                rb = right.next();
            }
        }
    }
    out
}
