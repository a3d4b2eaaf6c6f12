//! Executes a [`RunConfig`] and assembles its report.

use serde_json::{json, Value};
use thiserror::Error;

use crate::chunk::{aggregate, ChunkError, ColumnType, Datastore, MapReduceOptions};
use crate::config::{
    ConfigError, DesignSchemaConfig, MapReduceConfig, PlanConfig, RegressConfig, RunConfig, SimulateConfig, Subcommand,
};
use crate::pca::{design_schema, NumericMatrix, PcaError};
use crate::placement::{simulate, PlacementError};
use crate::report::{Artifact, Report};
use crate::staging::{plan, StagingError};
use crate::stats::{encode_binary, factor_lines, ReferenceTables, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Staging(#[from] StagingError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A finished run: the report plus side files to write beside it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("outputs serialize")
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let mut report = Report::new(cfg.subcommand.name(), to_value(cfg));
    let mut artifacts = Vec::new();
    let block = |present: bool| {
        if present {
            Ok(())
        } else {
            Err(ConfigError::MissingBlock {
                subcommand: cfg.subcommand,
                block: cfg.subcommand.block(),
            })
        }
    };
    match cfg.subcommand {
        Subcommand::Plan => {
            block(cfg.plan.is_some())?;
            run_plan(cfg.plan.as_ref().expect("checked"), &mut report)?
        }
        Subcommand::DesignSchema => {
            block(cfg.design_schema.is_some())?;
            run_design_schema(cfg.design_schema.as_ref().expect("checked"), &mut report)?
        }
        Subcommand::Simulate => {
            block(cfg.simulate.is_some())?;
            run_simulate(cfg.simulate.as_ref().expect("checked"), &mut report, &mut artifacts)?
        }
        Subcommand::Mapreduce => {
            block(cfg.mapreduce.is_some())?;
            run_mapreduce(cfg.mapreduce.as_ref().expect("checked"), &mut report, &mut artifacts)?
        }
        Subcommand::Regress => {
            block(cfg.regress.is_some())?;
            run_regress(cfg.regress.as_ref().expect("checked"), &mut report, &mut artifacts)?
        }
    }
    report.files = artifacts.iter().map(|a| a.name.clone()).collect();
    Ok(RunOutput { report, artifacts })
}

fn run_plan(p: &PlanConfig, report: &mut Report) -> Result<(), RunError> {
    let result = plan(&p.cluster, &p.workload, &p.kernels)?;
    if result.s_capacity.is_none() {
        report
            .warnings
            .push("workload stages no data; the staging ratio is set by bandwidth alone".into());
    }
    for k in &result.kernels {
        if k.energy.over_budget {
            report.warnings.push(format!(
                "kernel {:?} keeps staging nodes busy {:.3} s per {:.3} s interval (over budget)",
                k.name, k.energy.busy, p.workload.interval
            ));
        }
        if !k.offloadable {
            report.warnings.push(format!(
                "kernel {:?} throughput {} B/s does not exceed the {} B/s threshold",
                k.name, k.throughput, result.t_ssd_min
            ));
        }
    }
    report.outputs = to_value(&result);
    Ok(())
}

fn run_design_schema(d: &DesignSchemaConfig, report: &mut Report) -> Result<(), RunError> {
    let ds = Datastore::open(std::slice::from_ref(&d.input), &d.datastore)?;
    report.warnings.extend(ds.notes().iter().cloned());
    let table = ds.read_all()?;
    let names: Vec<String> = match &d.columns {
        Some(cols) => cols.clone(),
        None => table
            .schema()
            .into_iter()
            .filter(|f| f.ty != ColumnType::Text)
            .map(|f| f.name)
            .collect(),
    };
    let mut columns = Vec::with_capacity(names.len());
    for name in &names {
        let col = table
            .column(name)
            .ok_or_else(|| ChunkError::UnknownColumn(name.clone()))?;
        let values = col.to_f64().ok_or_else(|| {
            ChunkError::InvalidOption(format!("column {name:?} is text and cannot enter the correlation matrix"))
        })?;
        columns.push(values);
    }
    // listwise deletion of incomplete rows
    let keep: Vec<usize> = (0..table.num_rows())
        .filter(|&i| columns.iter().all(|c| c[i].is_finite()))
        .collect();
    let dropped = table.num_rows() - keep.len();
    if dropped > 0 {
        report
            .warnings
            .push(format!("{dropped} rows with missing values were left out of the correlation matrix"));
    }
    let columns: Vec<Vec<f64>> = columns.iter().map(|c| keep.iter().map(|&i| c[i]).collect()).collect();
    let data = NumericMatrix::new(names, columns)?;
    let proposal = design_schema(&data, d.threshold)?;
    report.outputs = json!({
        "rows_used": keep.len(),
        "proposal": to_value(&proposal),
        "dimensions": proposal.proposed_dimensions(),
    });
    Ok(())
}

fn run_simulate(s: &SimulateConfig, report: &mut Report, artifacts: &mut Vec<Artifact>) -> Result<(), RunError> {
    let scenario = s.load_scenario()?;
    let out = simulate(&scenario)?;
    if out.metrics.unfinished > 0 {
        report.warnings.push(format!(
            "{} transfers were unfinished at the horizon",
            out.metrics.unfinished
        ));
    }
    report.outputs = json!({
        "mode": scenario.policy.mode,
        "metrics": to_value(&out.metrics),
        "jobs": to_value(&out.jobs),
    });
    artifacts.push(Artifact::new("events.jsonl", out.log_jsonl()));
    Ok(())
}

fn run_mapreduce(m: &MapReduceConfig, report: &mut Report, artifacts: &mut Vec<Artifact>) -> Result<(), RunError> {
    let ds = Datastore::open(&m.inputs, &m.datastore)?;
    report.warnings.extend(ds.notes().iter().cloned());
    let mut options = MapReduceOptions {
        max_attempts: m.max_attempts,
        ..MapReduceOptions::default()
    };
    if let Some(w) = m.workers {
        options.workers = w;
    }
    let mut results = Vec::with_capacity(m.aggregates.len());
    let mut task_log = String::new();
    for (i, spec) in m.aggregates.iter().enumerate() {
        let (table, log) = aggregate(&ds, spec, &options)?;
        let name = format!("aggregate_{}.csv", i + 1);
        let mut csv = Vec::new();
        table
            .write_csv(&mut csv, "NA")
            .map_err(|e| ChunkError::InvalidOption(format!("cannot render {name}: {e}")))?;
        artifacts.push(Artifact::new(name.clone(), csv));
        task_log.push_str(&crate::chunk::log_to_jsonl(&log));
        results.push(json!({"spec": to_value(spec), "result": table.to_json(), "file": name}));
    }
    artifacts.push(Artifact::new("tasks.jsonl", task_log));
    report.outputs = json!({
        "schema": to_value(&ds.schema()),
        "chunk_size": ds.chunk_size(),
        "aggregates": results,
    });
    Ok(())
}

fn run_regress(r: &RegressConfig, report: &mut Report, artifacts: &mut Vec<Artifact>) -> Result<(), RunError> {
    let spec = r.model_spec()?;
    let ds = Datastore::open(std::slice::from_ref(&r.input), &r.datastore)?;
    report.warnings.extend(ds.notes().iter().cloned());
    let table = ds.read_all()?;
    let binary = r.binary_columns.clone().unwrap_or_else(|| spec.predictors.clone());
    let binary: Vec<&str> = binary.iter().map(String::as_str).collect();
    let presence: Vec<&str> = r.presence_tokens.iter().map(String::as_str).collect();
    let table = encode_binary(&table, &binary, &presence)?;
    let fit = spec.fit(&table)?;
    let summary = fit.summary();
    let anova = fit.anova();
    let (x, y) = spec.extract(&table)?;
    let lines = factor_lines((&spec.response, &y), &x)?;

    if r.compare_reference {
        let reference = ReferenceTables::bundled();
        if anova.regression.df == reference.anova.df_regression && anova.residual.df == reference.anova.df_residual {
            report.warnings.extend(reference.compare(&summary, &anova));
            report.warnings.extend(reference.internal_inconsistencies());
        } else {
            report.warnings.push(format!(
                "reference tables not compared: model df ({}, {}) differ from the reference ({}, {})",
                anova.regression.df, anova.residual.df, reference.anova.df_regression, reference.anova.df_residual
            ));
        }
    }

    let mut line_values = Vec::with_capacity(lines.len());
    for line in &lines {
        let name = format!("factor_{}.csv", line.predictor);
        let mut csv = Vec::new();
        line.write_csv(&mut csv)
            .map_err(|e| ChunkError::InvalidOption(format!("cannot render {name}: {e}")))?;
        artifacts.push(Artifact::new(name.clone(), csv));
        line_values.push(json!({
            "predictor": line.predictor,
            "rank": line.rank,
            "slope": line.slope,
            "intercept": line.intercept,
            "r_square": line.r_square,
            "file": name,
        }));
    }
    let slopes: serde_json::Map<String, Value> = fit
        .predictors
        .iter()
        .zip(&fit.slopes)
        .map(|(n, b)| (n.clone(), json!(b)))
        .collect();
    let mut pretty = |name: &str, v: Value| {
        let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
        s.push('\n');
        artifacts.push(Artifact::new(name, s));
    };
    pretty("summary.json", to_value(&summary));
    pretty("anova.json", to_value(&anova));
    report.outputs = json!({
        "model": to_value(&spec),
        "coefficients": {"intercept": fit.intercept, "slopes": slopes},
        "summary": to_value(&summary),
        "anova": to_value(&anova),
        "factor_lines": line_values,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(name: &str) -> String {
        format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn run(text: &str) -> Result<RunOutput, RunError> {
        execute(&RunConfig::from_json_str(text).map_err(RunError::Config)?)
    }

    #[test]
    fn regress_writes_one_csv_per_predictor() {
        let text = format!(
            r#"{{"schema_version": 1, "subcommand": "regress", "regress": {{"input": {:?}, "preset": 1}}}}"#,
            data("warehouses.csv")
        );
        let out = run(&text).unwrap();
        let csvs: Vec<_> = out.artifacts.iter().filter(|a| a.name.starts_with("factor_")).collect();
        assert_eq!(csvs.len(), 6);
        assert!(out.artifacts.iter().any(|a| a.name == "summary.json"));
        let anova = &out.report.outputs["anova"];
        assert!((anova["Regression"]["SS"].as_f64().unwrap() - 20.0).abs() < 1e-9);
        assert!(out.report.warnings.iter().any(|w| w.contains("F = 0.4") && w.contains("0.8435099")));
        assert_eq!(out.report.files.len(), out.artifacts.len());
    }

    #[test]
    fn regress_other_models_skip_the_reference() {
        let text = format!(
            r#"{{"schema_version": 1, "subcommand": "regress", "regress": {{"input": {:?}, "preset": 3}}}}"#,
            data("warehouses.csv")
        );
        let out = run(&text).unwrap();
        assert_eq!(out.report.warnings.len(), 1);
        assert!(out.report.warnings[0].starts_with("reference tables not compared"));
    }

    #[test]
    fn mapreduce_reports_each_aggregate() {
        let text = format!(
            r#"{{"schema_version": 1, "subcommand": "mapreduce", "mapreduce": {{
                "inputs": [{:?}], "datastore": {{"chunk_size": 3}},
                "aggregates": [{{"aggregate": "count", "value": "Delay"}}, {{"aggregate": "max", "value": "Delay"}}]}}}}"#,
            data("table1.csv")
        );
        let out = run(&text).unwrap();
        let aggs = out.report.outputs["aggregates"].as_array().unwrap();
        assert_eq!(aggs.len(), 2);
        assert!(out.artifacts.iter().any(|a| a.name == "aggregate_2.csv"));
        assert!(out.artifacts.iter().any(|a| a.name == "tasks.jsonl"));
        assert_eq!(out.report.outputs["chunk_size"], 3);
    }

    #[test]
    fn simulate_builtin_emits_event_log() {
        let out = run(r#"{"schema_version": 1, "subcommand": "simulate", "simulate": {"builtin": "overload"}}"#).unwrap();
        assert!(out.report.outputs["metrics"]["drop_rate"].as_f64().unwrap() > 0.0);
        let log = &out.artifacts.iter().find(|a| a.name == "events.jsonl").unwrap().contents;
        assert!(!log.is_empty());
    }

    #[test]
    fn plan_and_design_schema_run() {
        let text = r#"{"schema_version": 1, "subcommand": "plan", "plan": {
            "cluster": {"n_compute": 128, "bw_pfs": "50GB/s", "bw_host2ssd": "3GB/s", "bw_fm2c": "2GB/s",
                        "bw_c2m": "2GB/s", "c_ssd": "512GB", "p_active": "10W", "p_idle": "5W"},
            "workload": {"lambda_a": "2GB", "lambda_c": "8GB", "num_chkpts": 1, "interval": "1h", "alpha": 0.1},
            "kernels": [{"name": "slow", "throughput": "1MB/s"}]}}"#;
        let out = run(text).unwrap();
        assert!(out.report.warnings.iter().any(|w| w.contains("\"slow\"")));
        assert!(out.artifacts.is_empty());

        let text = format!(
            r#"{{"schema_version": 1, "subcommand": "design-schema", "design_schema": {{
                "input": {:?}, "columns": ["ActualElapsedTime", "CRSElapsedTime", "Delay"]}}}}"#,
            data("table1.csv")
        );
        let out = run(&text).unwrap();
        assert!(out.report.outputs["rows_used"].as_u64().unwrap() > 0);
    }

    #[test]
    fn missing_input_is_a_domain_error() {
        let out = run(r#"{"schema_version": 1, "subcommand": "regress", "regress": {"input": "/nonexistent.csv"}}"#);
        assert!(matches!(out, Err(RunError::Chunk(_))));
    }
}
