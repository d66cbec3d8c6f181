//! Machine-readable experiment reports.
//!
//! The layout is described by the JSON Schema in [`REPORT_SCHEMA`]
//! (`schema/report.schema.json` in the crate).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{AuResult, ExpressionResult, MethodComparison, SweepTable};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Expressions,
    Aus,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportError {
    pub stage: String,
    #[serde(default)]
    pub item: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub task: Task,
    /// Echo of the run configuration.
    pub config: serde_json::Value,
    pub environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expressions: Option<ExpressionResult>,
    /// Same protocol on label-shuffled data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ExpressionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<MethodComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aus: Option<AuResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    pub errors: Vec<ReportError>,
}

impl ExperimentReport {
    pub fn new(task: Task, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            task,
            config: serde_json::to_value(config)?,
            environment: Environment::current(),
            expressions: None,
            control: None,
            comparison: None,
            aus: None,
            sweep: None,
            errors: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_parses_and_roundtrip() {
        let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
        assert_eq!(schema["properties"]["schema_version"]["const"], SCHEMA_VERSION);
        let mut r = ExperimentReport::new(Task::Aus, &serde_json::json!({"k": 50})).unwrap();
        r.errors.push(ReportError {
            stage: "features".into(),
            item: Some("S001 HA 1".into()),
            message: "bad mesh".into(),
        });
        let back: ExperimentReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
