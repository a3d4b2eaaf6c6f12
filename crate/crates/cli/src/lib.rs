//! Command-line front end: flag parsing, config merging and the run loop.
//!
//! Flags are applied on top of the `--config` file (if any) as edits to the
//! JSON document, so they pass through the same strict parsing and unit
//! normalization as the file itself.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use serde_json::{json, Map, Value};

use dwstage::config::{RunConfig, Subcommand, OUT_DIR_ENV, SCHEMA_VERSION};
use dwstage::report::emit_report;
use dwstage::run::{execute, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dwstage", version, about = "Staging, placement and analysis toolkit for warehouse data pipelines")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides the environment and the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, ClapSubcommand)]
enum Command {
    /// Size the SSD staging tier and check kernel offload feasibility.
    Plan(PlanArgs),
    /// Propose a dimension schema from correlation PCA.
    DesignSchema(DesignSchemaArgs),
    /// Run the data placement simulator.
    Simulate(SimulateArgs),
    /// Aggregate CSV files with the chunked MapReduce engine.
    Mapreduce(MapReduceArgs),
    /// Fit an OLS model on binary-coded factors.
    Regress(RegressArgs),
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    n_compute: Option<u64>,
    #[arg(long, value_name = "RATE")]
    bw_pfs: Option<String>,
    #[arg(long, value_name = "RATE")]
    bw_host2ssd: Option<String>,
    #[arg(long, value_name = "RATE")]
    bw_fm2c: Option<String>,
    #[arg(long, value_name = "RATE")]
    bw_c2m: Option<String>,
    #[arg(long, value_name = "BYTES")]
    c_ssd: Option<String>,
    #[arg(long, value_name = "WATTS")]
    p_active: Option<String>,
    #[arg(long, value_name = "WATTS")]
    p_idle: Option<String>,
    #[arg(long, value_name = "BYTES")]
    lambda_a: Option<String>,
    #[arg(long, value_name = "BYTES")]
    lambda_c: Option<String>,
    #[arg(long)]
    num_chkpts: Option<u32>,
    #[arg(long, value_name = "SECONDS")]
    interval: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Analysis kernel as NAME=RATE; repeat for several. Replaces the config's list.
    #[arg(long, value_name = "NAME=RATE")]
    kernel: Vec<String>,
}

#[derive(Debug, Args)]
struct DesignSchemaArgs {
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Comma-separated numeric columns (default: all numeric columns).
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    chunk_size: Option<u64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Bundled scenario name.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// managed or lossy-priority-baseline.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Debug, Args)]
struct MapReduceArgs {
    /// Input CSV; repeat for several. Replaces the config's list.
    #[arg(long, value_name = "CSV")]
    input: Vec<PathBuf>,
    #[arg(long)]
    chunk_size: Option<u64>,
    #[arg(long)]
    workers: Option<u64>,
    #[arg(long)]
    max_attempts: Option<u32>,
    /// FUNC[:COLUMN][@GROUP]; repeat for several. Replaces the config's list.
    #[arg(long, value_name = "SPEC")]
    aggregate: Vec<String>,
}

#[derive(Debug, Args)]
struct RegressArgs {
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Bundled model 1, 2 or 3.
    #[arg(long, conflicts_with_all = ["response", "predictors"])]
    preset: Option<u8>,
    #[arg(long, requires = "predictors")]
    response: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "response")]
    predictors: Option<Vec<String>>,
    /// Skip the comparison against the printed reference tables.
    #[arg(long)]
    no_reference: bool,
    #[arg(long)]
    chunk_size: Option<u64>,
}

/// A parsed command line: the normalized config and where to write.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Help or version text; not a failure.
    Info(String),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Info(s) | CliError::Usage(s) => f.write_str(s),
        }
    }
}

fn set(root: &mut Value, path: &[&str], value: Value) {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        let map = node.as_object_mut().expect("config nodes are objects");
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
    }
    node.as_object_mut()
        .expect("config nodes are objects")
        .insert(path[path.len() - 1].to_string(), value);
}

fn set_opt<T: Into<Value>>(root: &mut Value, path: &[&str], value: Option<T>) {
    if let Some(v) = value {
        set(root, path, v.into());
    }
}

fn path_value(p: PathBuf) -> Value {
    json!(p)
}

fn parse_kernel(s: &str) -> Result<Value, CliError> {
    let (name, rate) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--kernel expects NAME=RATE, got {s:?}")))?;
    Ok(json!({"name": name, "throughput": rate}))
}

/// `FUNC[:COLUMN][@GROUP]`, e.g. `mean:Delay@ServerNum`.
fn parse_aggregate(s: &str) -> Result<Value, CliError> {
    let (head, group) = match s.split_once('@') {
        Some((h, g)) => (h, Some(g)),
        None => (s, None),
    };
    let (func, column) = match head.split_once(':') {
        Some((f, c)) => (f, Some(c)),
        None => (head, None),
    };
    if func.is_empty() || column == Some("") || group == Some("") {
        return Err(CliError::Usage(format!("--aggregate expects FUNC[:COLUMN][@GROUP], got {s:?}")));
    }
    let mut v = json!({"aggregate": func});
    set_opt(&mut v, &["value"], column);
    set_opt(&mut v, &["group_by"], group);
    Ok(v)
}

fn apply_flags(doc: &mut Value, command: Command) -> Result<(), CliError> {
    match command {
        Command::Plan(a) => {
            let c = |k: &'static str| ["plan", "cluster", k];
            let w = |k: &'static str| ["plan", "workload", k];
            set_opt(doc, &c("n_compute"), a.n_compute);
            set_opt(doc, &c("bw_pfs"), a.bw_pfs);
            set_opt(doc, &c("bw_host2ssd"), a.bw_host2ssd);
            set_opt(doc, &c("bw_fm2c"), a.bw_fm2c);
            set_opt(doc, &c("bw_c2m"), a.bw_c2m);
            set_opt(doc, &c("c_ssd"), a.c_ssd);
            set_opt(doc, &c("p_active"), a.p_active);
            set_opt(doc, &c("p_idle"), a.p_idle);
            set_opt(doc, &w("lambda_a"), a.lambda_a);
            set_opt(doc, &w("lambda_c"), a.lambda_c);
            set_opt(doc, &w("num_chkpts"), a.num_chkpts);
            set_opt(doc, &w("interval"), a.interval);
            set_opt(doc, &w("alpha"), a.alpha);
            if !a.kernel.is_empty() {
                let kernels = a.kernel.iter().map(|k| parse_kernel(k)).collect::<Result<Vec<_>, _>>()?;
                set(doc, &["plan", "kernels"], Value::Array(kernels));
            }
        }
        Command::DesignSchema(a) => {
            set_opt(doc, &["design_schema", "input"], a.input.map(path_value));
            set_opt(doc, &["design_schema", "columns"], a.columns);
            set_opt(doc, &["design_schema", "threshold"], a.threshold);
            set_opt(doc, &["design_schema", "datastore", "chunk_size"], a.chunk_size);
        }
        Command::Simulate(a) => {
            // a source flag replaces whatever source the file named
            if a.scenario.is_some() || a.builtin.is_some() {
                if let Some(block) = doc.get_mut("simulate").and_then(Value::as_object_mut) {
                    for key in ["scenario_file", "scenario", "builtin"] {
                        block.remove(key);
                    }
                }
            }
            set_opt(doc, &["simulate", "scenario_file"], a.scenario.map(path_value));
            set_opt(doc, &["simulate", "builtin"], a.builtin);
            set_opt(doc, &["simulate", "mode"], a.mode);
        }
        Command::Mapreduce(a) => {
            if !a.input.is_empty() {
                set(doc, &["mapreduce", "inputs"], json!(a.input));
            }
            set_opt(doc, &["mapreduce", "datastore", "chunk_size"], a.chunk_size);
            set_opt(doc, &["mapreduce", "workers"], a.workers);
            set_opt(doc, &["mapreduce", "max_attempts"], a.max_attempts);
            if !a.aggregate.is_empty() {
                let specs = a.aggregate.iter().map(|s| parse_aggregate(s)).collect::<Result<Vec<_>, _>>()?;
                set(doc, &["mapreduce", "aggregates"], Value::Array(specs));
            }
        }
        Command::Regress(a) => {
            set_opt(doc, &["regress", "input"], a.input.map(path_value));
            if a.preset.is_some() || a.response.is_some() {
                if let Some(block) = doc.get_mut("regress").and_then(Value::as_object_mut) {
                    block.remove("preset");
                    block.remove("model");
                }
            }
            set_opt(doc, &["regress", "preset"], a.preset);
            if let (Some(response), Some(predictors)) = (a.response, a.predictors) {
                set(doc, &["regress", "model"], json!({"response": response, "predictors": predictors}));
            }
            if a.no_reference {
                set(doc, &["regress", "compare_reference"], json!(false));
            }
            set_opt(doc, &["regress", "datastore", "chunk_size"], a.chunk_size);
        }
    }
    Ok(())
}

fn subcommand_of(command: &Command) -> Subcommand {
    match command {
        Command::Plan(_) => Subcommand::Plan,
        Command::DesignSchema(_) => Subcommand::DesignSchema,
        Command::Simulate(_) => Subcommand::Simulate,
        Command::Mapreduce(_) => Subcommand::Mapreduce,
        Command::Regress(_) => Subcommand::Regress,
    }
}

/// Parses arguments (including the program name) into a validated config.
/// `env_out` is the value of the output-directory environment variable.
pub fn parse_cli_with_env<I, T>(args: I, env_out: Option<&str>) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        if e.use_stderr() {
            CliError::Usage(e.render().to_string())
        } else {
            CliError::Info(e.render().to_string())
        }
    })?;
    let sub = subcommand_of(&cli.command);
    let mut doc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => json!({"schema_version": SCHEMA_VERSION}),
    };
    if !doc.is_object() {
        return Err(CliError::Usage("config must be a JSON object".into()));
    }
    match doc.get("subcommand") {
        None => set(&mut doc, &["subcommand"], json!(sub.name())),
        Some(v) if v.as_str() == Some(sub.name()) => {}
        Some(v) => {
            return Err(CliError::Usage(format!(
                "config is for subcommand {v}, but {} was requested",
                sub.name()
            )))
        }
    }
    if doc.get(sub.block()).is_none() {
        set(&mut doc, &[sub.block()], json!({}));
    }
    apply_flags(&mut doc, cli.command)?;
    if let Some(out) = &cli.out {
        set(&mut doc, &["out_dir"], json!(out));
    }
    let config = RunConfig::from_value(doc).map_err(|e| CliError::Usage(e.to_string()))?;
    let out_dir = config.resolve_out_dir(cli.out.as_deref(), env_out);
    Ok(Invocation { config, out_dir })
}

pub fn parse_cli<I, T>(args: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env = std::env::var(OUT_DIR_ENV).ok();
    parse_cli_with_env(args, env.as_deref())
}

/// Runs a full invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = match parse_cli(args) {
        Ok(inv) => inv,
        Err(CliError::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(CliError::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            return EXIT_USAGE;
        }
    };
    let output = match execute(&inv.config) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    match emit_report(&output.report, &output.artifacts, &inv.out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}
