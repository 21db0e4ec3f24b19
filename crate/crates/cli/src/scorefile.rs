//! Delimited score files: one per (attribute, window), carrying the
//! initial, cumulative, and dominant score for each timestamp plus a
//! metadata comment line so downstream commands can rebuild the
//! representation without the original config.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use outrel_core::scoring::ScoreKind;
use outrel_core::{Representation, Thresholds, Timestamp};

use crate::CliError;

#[derive(Debug)]
pub struct ScoreFile {
    pub initial: Representation,
    pub cumulative: Representation,
    pub dominant: Representation,
}

impl ScoreFile {
    pub fn file_name(&self) -> String {
        let attr = self.initial.attr_id.replace(['/', '\\', ' '], "_");
        match self.initial.window_phi {
            Some(phi) => format!("{attr}__phi{phi}.csv"),
            None => format!("{attr}.csv"),
        }
    }
}

pub fn write_score_file(dir: &Path, scores: &ScoreFile) -> Result<PathBuf, CliError> {
    let path = dir.join(scores.file_name());
    let mut out = std::fs::File::create(&path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))?;
    let th = scores.initial.thresholds;
    writeln!(
        out,
        "# attr={} phi={} lambda={} theta_pos={} theta_neg={}",
        scores.initial.attr_id,
        scores.initial.window_phi.map_or_else(|| "-".into(), |p| p.to_string()),
        scores.cumulative.lambda.unwrap_or(0.0),
        th.theta_pos,
        th.theta_neg,
    )
    .and_then(|_| writeln!(out, "timestamp,initial,cumulative,dominant"))
    .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;

    for (ts, initial) in &scores.initial.scores {
        writeln!(
            out,
            "{ts},{initial},{},{}",
            scores.cumulative.scores[ts], scores.dominant.scores[ts]
        )
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(path)
}

pub fn read_score_file(path: &Path) -> Result<ScoreFile, CliError> {
    let bad = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();

    let meta_line = lines
        .next()
        .transpose()
        .map_err(|e| bad(e.to_string()))?
        .ok_or_else(|| bad("empty score file".into()))?;
    let meta = parse_metadata(&meta_line).ok_or_else(|| bad(format!("bad metadata line {meta_line:?}")))?;

    let header = lines.next().transpose().map_err(|e| bad(e.to_string()))?;
    if header.as_deref() != Some("timestamp,initial,cumulative,dominant") {
        return Err(bad(format!("unexpected header {header:?}")));
    }

    let mut initial = BTreeMap::new();
    let mut cumulative = BTreeMap::new();
    let mut dominant = BTreeMap::new();
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let ts = fields
            .next()
            .and_then(|f| Timestamp::parse(f).ok())
            .ok_or_else(|| bad(format!("bad row {line:?}")))?;
        let mut value = || -> Option<f64> { fields.next()?.parse().ok() };
        let (u, c, d) = (value(), value(), value());
        match (u, c, d) {
            (Some(u), Some(c), Some(d)) => {
                initial.insert(ts, u);
                cumulative.insert(ts, c);
                dominant.insert(ts, d);
            }
            _ => return Err(bad(format!("bad row {line:?}"))),
        }
    }

    let make = |kind: ScoreKind, scores: BTreeMap<Timestamp, f64>, lambda: Option<f64>| {
        Representation {
            attr_id: meta.attr.clone(),
            kind,
            window_phi: meta.phi,
            lambda,
            scores,
            thresholds: meta.thresholds,
        }
    };
    Ok(ScoreFile {
        initial: make(ScoreKind::MeanResidual, initial, None),
        cumulative: make(ScoreKind::Cumulative, cumulative, Some(meta.lambda)),
        dominant: make(ScoreKind::Dominant, dominant, Some(meta.lambda)),
    })
}

struct Metadata {
    attr: String,
    phi: Option<usize>,
    lambda: f64,
    thresholds: Thresholds,
}

fn parse_metadata(line: &str) -> Option<Metadata> {
    let rest = line.strip_prefix("# ")?;
    let mut attr = None;
    let mut phi = None;
    let mut lambda = None;
    let mut theta_pos = None;
    let mut theta_neg = None;
    for token in rest.split_whitespace() {
        let (key, value) = token.split_once('=')?;
        match key {
            "attr" => attr = Some(value.to_string()),
            "phi" => phi = Some(if value == "-" { None } else { Some(value.parse().ok()?) }),
            "lambda" => lambda = Some(value.parse().ok()?),
            "theta_pos" => theta_pos = Some(value.parse().ok()?),
            "theta_neg" => theta_neg = Some(value.parse().ok()?),
            _ => return None,
        }
    }
    Some(Metadata {
        attr: attr?,
        phi: phi?,
        lambda: lambda?,
        thresholds: Thresholds::new(theta_pos?, theta_neg?).ok()?,
    })
}
