//! Run configuration: a single TOML file naming the inputs, their ingest
//! schemas, the run parameters, and output locations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use outrel_core::ingest::{AttributeSpec, IngestSchema};
use outrel_core::{Granularity, PodsParams};

use crate::CliError;

/// One delimited input file and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    /// Attribute id prefix; defaults to the file stem.
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

impl InputSpec {
    pub fn schema(&self) -> IngestSchema {
        IngestSchema {
            dataset: self.dataset.clone(),
            timestamp_column: self.timestamp_column.clone(),
            timestamp_format: self.timestamp_format.clone(),
            attributes: self.attributes.clone(),
            granularity: self.granularity,
            delimiter: self.delimiter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory score files and reports land in unless a flag overrides.
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub params: PodsParams,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Parse and validate a configuration file. Unknown keys and out-of-range
/// parameters are rejected with the offending field named.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let config: Config = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
    config.params.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}
