use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CLUSTER: &str = r#"{
  "schema_version": 1,
  "subcommand": "plan",
  "plan": {
    "cluster": {
      "n_compute": 128, "bw_pfs": "50GB/s", "bw_host2ssd": "3GB/s", "bw_fm2c": "2GB/s",
      "bw_c2m": "2GB/s", "c_ssd": "512GB", "p_active": "10W", "p_idle": "5W"
    },
    "workload": {"lambda_a": "1GB", "lambda_c": "8GB", "num_chkpts": 1, "interval": "30min", "alpha": 0.1},
    "kernels": [{"name": "histogram", "throughput": "5MB/s"}]
  }
}"#;

fn data(name: &str) -> String {
    format!("{}/../core/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn dwstage(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwstage"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DWSTAGE_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn plan_flags_override_config_units() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cluster.json");
    fs::write(&cfg, CLUSTER).unwrap();
    let out = tmp.path().join("out");
    let o = dwstage(
        &["plan", "--config", cfg.to_str().unwrap(), "--lambda-a", "2GB", "--interval", "3600s"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["plan"]["workload"]["lambda_a"], 2e9);
    assert_eq!(r["config"]["plan"]["workload"]["interval"], 3600.0);
    for key in ["s_capacity", "s_bandwidth", "s", "t_ssd_min"] {
        assert!(r["outputs"].get(key).is_some(), "missing {key}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, r["config"]);
    assert!(out.join("report.txt").exists());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = dwstage(&["mapreduce", "--input", &data("table1.csv"), "--aggregate", "count", "--chunk-size", "0"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chunk_size"));
    assert_eq!(dwstage(&["plan", "--no-such-flag"], &out).status.code(), Some(2));
    assert_eq!(dwstage(&["plan", "--lambda-a", "2GiB"], &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn domain_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dwstage(&["regress", "--input", "/no/such/file.csv"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let args = ["mapreduce", "--input", &data("table1.csv"), "--aggregate", "mean:Delay", "--aggregate", "max:ActualElapsedTime", "--chunk-size", "3"];
    assert_eq!(dwstage(&args, &out).status.code(), Some(0));
    let first = fs::read(out.join("report.json")).unwrap();
    let first_txt = fs::read(out.join("report.txt")).unwrap();
    assert_eq!(dwstage(&args, &out).status.code(), Some(0));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("report.txt")).unwrap(), first_txt);
    let r = report(&out);
    assert_eq!(r["outputs"]["aggregates"][0]["result"][0]["value"], 15.875);
    assert_eq!(r["outputs"]["aggregates"][1]["result"][0]["value"], 155.0);
}

#[test]
fn regress_writes_summary_anova_and_six_factor_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = dwstage(&["regress", "--input", &data("warehouses.csv"), "--preset", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let factors = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("factor_"))
        .count();
    assert_eq!(factors, 6);
    assert!(out.join("summary.json").exists() && out.join("anova.json").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.8435099"));
}

#[test]
fn simulate_writes_events_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = dwstage(&["simulate", "--builtin", "overload", "--mode", "managed"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["outputs"]["metrics"]["drop_rate"], 0.0);
    assert!(fs::read_to_string(out.join("events.jsonl")).unwrap().lines().count() > 16);
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dwstage"))
        .args(["simulate", "--builtin", "overload"])
        .env("DWSTAGE_OUT", tmp.path().join("envout"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("envout/events.jsonl").exists());
}

#[test]
fn bundled_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let tmp = tempfile::tempdir().unwrap();
    for (file, sub) in [
        ("plan", "plan"),
        ("design_schema", "design-schema"),
        ("simulate", "simulate"),
        ("mapreduce", "mapreduce"),
        ("regress", "regress"),
    ] {
        let out = tmp.path().join(file);
        let o = Command::new(env!("CARGO_BIN_EXE_dwstage"))
            .current_dir(&root)
            .args([sub, "--config", &format!("configs/{file}.json"), "--out"])
            .arg(&out)
            .env_remove("DWSTAGE_OUT")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{file}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&out)["subcommand"], sub);
    }
    let o = Command::new(env!("CARGO_BIN_EXE_dwstage"))
        .current_dir(&root)
        .args(["simulate", "--config", "configs/plan.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
