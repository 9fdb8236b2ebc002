use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::{CommandKind, CommandOutput};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Value,
    pub warnings: Vec<String>,
    pub failed: bool,
    /// Wall-clock seconds; the only nondeterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn new(kind: CommandKind, config: &RunConfig, output: &CommandOutput, elapsed: f64) -> Self {
        let mut timings = BTreeMap::new();
        timings.insert("total_s".to_string(), elapsed);
        Self {
            tool: "protoclone".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: kind.name().to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            config: config.clone(),
            outputs: output.outputs.clone(),
            warnings: output.warnings.clone(),
            failed: output.failed,
            timings,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// The record with timings cleared, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }
}
