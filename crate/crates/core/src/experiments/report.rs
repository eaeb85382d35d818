//! The JSON run report and run-directory layout.
//!
//! Every subcommand writes `config.toml` (the resolved configuration) and
//! `report.json` into its run directory. The report envelope is described by
//! `schema/report.v1.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "lrsense.report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// The schema document, embedded so tools can ship it alongside reports.
pub const REPORT_SCHEMA_JSON: &str = include_str!("../../schema/report.v1.json");

pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config: Value,
    /// Top-level config keys that kept their built-in default.
    pub defaults_used: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    pub result: Value,
}

impl Report {
    pub fn new<C: Serialize, R: Serialize>(
        command: &str,
        config: &C,
        defaults_used: Vec<String>,
        assertions: Vec<Assertion>,
        result: &R,
    ) -> Result<Self> {
        Ok(Self {
            schema: REPORT_SCHEMA.to_string(),
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            defaults_used,
            passed: assertions.iter().all(|a| a.passed),
            assertions,
            result: serde_json::to_value(result)?,
        })
    }
}

/// Creates `dir` and writes the config snapshot.
pub fn prepare_run_dir<C: Serialize>(dir: &Path, config: &C) -> Result<()> {
    fs::create_dir_all(dir)?;
    let text = toml::to_string(config).map_err(|e| Error::Format(format!("cannot serialize config: {e}")))?;
    fs::write(dir.join(CONFIG_FILE), text)?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let f = fs::File::create(dir.join(REPORT_FILE))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), report)?;
    Ok(())
}

/// Replaces non-finite numbers, which JSON cannot carry, with `null`.
pub fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
