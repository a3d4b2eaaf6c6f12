//! Versioned run configuration shared by every subcommand.
//!
//! A config names one subcommand and carries exactly that subcommand's
//! parameter block. Quantities may be written with decimal unit suffixes
//! (`"2GB"`, `"10GB/s"`, `"1h"`); they are normalized to SI numbers on
//! parse, and re-serializing a parsed config yields plain numbers that parse
//! back to the same value.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::{AggregateSpec, DatastoreOptions};
use crate::pca::DEFAULT_THRESHOLD;
use crate::placement::{Mode, Scenario};
use crate::staging::{AnalysisKernel, ClusterConfig, Workload};
use crate::stats::{ModelSpec, DEFAULT_PRESENCE_TOKENS};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "DWSTAGE_OUT";
pub const DEFAULT_OUT_DIR: &str = "dwstage-out";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path:?}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found}; this build reads version {SCHEMA_VERSION}")]
    Version { found: u32 },
    #[error("subcommand {subcommand} needs a {block:?} block")]
    MissingBlock { subcommand: Subcommand, block: &'static str },
    #[error("block {block:?} does not belong to subcommand {subcommand}")]
    ExtraBlock { subcommand: Subcommand, block: &'static str },
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Plan,
    DesignSchema,
    Simulate,
    Mapreduce,
    Regress,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Plan,
        Subcommand::DesignSchema,
        Subcommand::Simulate,
        Subcommand::Mapreduce,
        Subcommand::Regress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Plan => "plan",
            Subcommand::DesignSchema => "design-schema",
            Subcommand::Simulate => "simulate",
            Subcommand::Mapreduce => "mapreduce",
            Subcommand::Regress => "regress",
        }
    }

    /// JSON key of the subcommand's parameter block.
    pub fn block(self) -> &'static str {
        match self {
            Subcommand::Plan => "plan",
            Subcommand::DesignSchema => "design_schema",
            Subcommand::Simulate => "simulate",
            Subcommand::Mapreduce => "mapreduce",
            Subcommand::Regress => "regress",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub cluster: ClusterConfig,
    pub workload: Workload,
    #[serde(default)]
    pub kernels: Vec<AnalysisKernel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSchemaConfig {
    pub input: PathBuf,
    /// Columns to analyse; all numeric columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub datastore: DatastoreOptions,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Where the simulation scenario comes from; exactly one source is allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// `"overload"` selects the bundled overload scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Overrides the scenario's policy mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

impl SimulateConfig {
    pub fn load_scenario(&self) -> Result<Scenario, ConfigError> {
        let mut scenario = match (&self.scenario_file, &self.scenario, &self.builtin) {
            (Some(path), None, None) => {
                let text = read(path)?;
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?
            }
            (None, Some(s), None) => s.clone(),
            (None, None, Some(name)) if name == "overload" => Scenario::overload(),
            (None, None, Some(name)) => return Err(ConfigError::Invalid(format!("unknown builtin scenario {name:?}"))),
            _ => {
                return Err(ConfigError::Invalid(
                    "simulate needs exactly one of scenario_file, scenario or builtin".into(),
                ))
            }
        };
        if let Some(mode) = self.mode {
            scenario = scenario.with_mode(mode);
        }
        Ok(scenario)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapReduceConfig {
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub datastore: DatastoreOptions,
    /// Worker threads; the machine's parallelism when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    pub aggregates: Vec<AggregateSpec>,
}

fn default_attempts() -> u32 {
    crate::chunk::DEFAULT_MAX_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    pub input: PathBuf,
    /// Built-in warehouse model 1, 2 or 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Columns passed through binary encoding; the predictors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_columns: Option<Vec<String>>,
    #[serde(default = "default_presence")]
    pub presence_tokens: Vec<String>,
    /// Compare the fit against the bundled published tables.
    #[serde(default = "yes")]
    pub compare_reference: bool,
    #[serde(default)]
    pub datastore: DatastoreOptions,
}

fn default_presence() -> Vec<String> {
    DEFAULT_PRESENCE_TOKENS.iter().map(|s| s.to_string()).collect()
}

fn yes() -> bool {
    true
}

impl RegressConfig {
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        match (self.preset, &self.model) {
            (Some(p), None) => {
                ModelSpec::preset(p).ok_or_else(|| ConfigError::Invalid(format!("no preset model {p}; choose 1, 2 or 3")))
            }
            (None, Some(m)) => {
                m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(m.clone())
            }
            (None, None) => Ok(ModelSpec::preset(1).expect("preset 1 exists")),
            (Some(_), Some(_)) => Err(ConfigError::Invalid("give either preset or model, not both".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub subcommand: Subcommand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_schema: Option<DesignSchemaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapreduce: Option<MapReduceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regress: Option<RegressConfig>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl RunConfig {
    /// Strict parse followed by validation.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        if let Some(v) = value.get("schema_version").and_then(|v| v.as_u64()) {
            if v != SCHEMA_VERSION as u64 {
                return Err(ConfigError::Version { found: v as u32 });
            }
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json_str(&read(path)?)
    }

    /// Pretty JSON with every quantity in SI units.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                found: self.schema_version,
            });
        }
        let present = [
            (Subcommand::Plan, self.plan.is_some()),
            (Subcommand::DesignSchema, self.design_schema.is_some()),
            (Subcommand::Simulate, self.simulate.is_some()),
            (Subcommand::Mapreduce, self.mapreduce.is_some()),
            (Subcommand::Regress, self.regress.is_some()),
        ];
        for (sub, has) in present {
            if sub == self.subcommand && !has {
                return Err(ConfigError::MissingBlock {
                    subcommand: self.subcommand,
                    block: sub.block(),
                });
            }
            if sub != self.subcommand && has {
                return Err(ConfigError::ExtraBlock {
                    subcommand: self.subcommand,
                    block: sub.block(),
                });
            }
        }
        let invalid = |e: &dyn fmt::Display| ConfigError::Invalid(e.to_string());
        let datastore = |d: &DatastoreOptions| {
            if d.chunk_size < 1 {
                Err(ConfigError::Invalid("chunk_size must be at least 1".into()))
            } else if d.infer_rows < 1 {
                Err(ConfigError::Invalid("infer_rows must be at least 1".into()))
            } else {
                Ok(())
            }
        };
        if let Some(p) = &self.plan {
            p.cluster.validate().map_err(|e| invalid(&e))?;
            p.workload.validate().map_err(|e| invalid(&e))?;
            for k in &p.kernels {
                if !(k.throughput > 0.0) {
                    return Err(ConfigError::Invalid(format!("kernel {:?} needs a positive throughput", k.name)));
                }
            }
        }
        if let Some(d) = &self.design_schema {
            datastore(&d.datastore)?;
            if !(d.threshold > 0.0 && d.threshold <= 1.0) {
                return Err(ConfigError::Invalid(format!("threshold must lie in (0, 1], got {}", d.threshold)));
            }
        }
        if let Some(s) = &self.simulate {
            s.load_scenario()?.validate().map_err(|e| invalid(&e))?;
        }
        if let Some(m) = &self.mapreduce {
            datastore(&m.datastore)?;
            if m.inputs.is_empty() {
                return Err(ConfigError::Invalid("mapreduce needs at least one input".into()));
            }
            if m.aggregates.is_empty() {
                return Err(ConfigError::Invalid("mapreduce needs at least one aggregate".into()));
            }
            if m.workers == Some(0) || m.max_attempts == 0 {
                return Err(ConfigError::Invalid("workers and max_attempts must be at least 1".into()));
            }
        }
        if let Some(r) = &self.regress {
            datastore(&r.datastore)?;
            r.model_spec()?;
        }
        Ok(())
    }

    /// Output directory: an explicit override, then the environment
    /// variable, then the config's own value, then the default.
    pub fn resolve_out_dir(&self, cli: Option<&Path>, env: Option<&str>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| env.filter(|e| !e.is_empty()).map(PathBuf::from))
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
