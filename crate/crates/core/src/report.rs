//! Run reports: one JSON document rendered both as `report.json` and as a
//! flat `report.txt`, plus any side files the run produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot write {path:?}: {message}")]
pub struct ReportError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// The fully normalized run configuration.
    pub config: serde_json::Value,
    pub outputs: serde_json::Value,
    pub warnings: Vec<String>,
    /// Side files written next to the report, by name.
    pub files: Vec<String>,
}

/// A side file to be written into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<Vec<u8>>) -> Self {
        Artifact {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

impl Report {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config,
            outputs: serde_json::Value::Object(Default::default()),
            warnings: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("reports serialize");
        s.push('\n');
        s
    }

    /// One `path = value` line per JSON leaf, values in JSON syntax.
    pub fn to_text(&self) -> String {
        render_text(&self.to_value())
    }
}

pub fn render_text(value: &serde_json::Value) -> String {
    let mut out = String::new();
    for (path, leaf) in flatten(value) {
        out.push_str(&path);
        out.push_str(" = ");
        out.push_str(&leaf.to_string());
        out.push('\n');
    }
    out
}

/// Leaves of a JSON value keyed by dotted path (`a.b[2].c`), in document
/// order. Empty objects and arrays count as leaves.
pub fn flatten(value: &serde_json::Value) -> Vec<(String, serde_json::Value)> {
    fn walk(path: String, v: &serde_json::Value, out: &mut Vec<(String, serde_json::Value)>) {
        match v {
            serde_json::Value::Object(map) if !map.is_empty() => {
                for (k, child) in map {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    walk(p, child, out);
                }
            }
            serde_json::Value::Array(items) if !items.is_empty() => {
                for (i, child) in items.iter().enumerate() {
                    walk(format!("{path}[{i}]"), child, out);
                }
            }
            leaf => out.push((path, leaf.clone())),
        }
    }
    let mut out = Vec::new();
    walk(String::new(), value, &mut out);
    out
}

/// Parses text produced by [`render_text`] back into (path, value) pairs.
pub fn parse_text(text: &str) -> Result<Vec<(String, serde_json::Value)>, String> {
    text.lines()
        .map(|line| {
            let (path, value) = line
                .split_once(" = ")
                .ok_or_else(|| format!("malformed line {line:?}"))?;
            let value = serde_json::from_str(value).map_err(|e| format!("{line:?}: {e}"))?;
            Ok((path.to_string(), value))
        })
        .collect()
}

fn write(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|e| ReportError {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `report.json`, `report.txt`, `manifest.json` and every artifact
/// into `dir`, creating it if needed. Returns the paths written.
pub fn emit_report(report: &Report, artifacts: &[Artifact], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|e| ReportError {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut report = report.clone();
    report.files = artifacts.iter().map(|a| a.name.clone()).collect();
    let mut manifest = serde_json::to_string_pretty(&report.config).expect("configs serialize");
    manifest.push('\n');
    let mut written = Vec::new();
    for (name, contents) in [
        ("report.json", report.to_json().into_bytes()),
        ("report.txt", report.to_text().into_bytes()),
        ("manifest.json", manifest.into_bytes()),
    ] {
        let path = dir.join(name);
        write(&path, &contents)?;
        written.push(path);
    }
    for a in artifacts {
        let path = dir.join(&a.name);
        write(&path, &a.contents)?;
        written.push(path);
    }
    Ok(written)
}
