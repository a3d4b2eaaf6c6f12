//! Randomized property checks shared by the property tests and the
//! acceptance harness. Each check takes one drawn case and fails through
//! `prop_assert!`.

use std::collections::BTreeMap;
use std::io::Write;

use dwstage::chunk::{
    aggregate, Aggregate, AggregateSpec, ColumnType, Datastore, DatastoreOptions, InjectedFailure, MapReduceOptions,
    MissingPolicy, Phase,
};
use dwstage::config::RunConfig;
use dwstage::placement::{
    simulate, AclEntry, AllocationRequest, Endpoint, EventKind, FailureKind, FailureSpec, JobState, Mode, Permission,
    PlacementPolicy, Scenario, SimOutput, StorageSite, TransferJob,
};
use dwstage::stats::fit_ols;
use proptest::prelude::*;
use serde_json::{json, Value};

const GB: f64 = 1e9;

// ---------------------------------------------------------------- placement

#[derive(Debug, Clone)]
pub struct Draw {
    pub sites: Vec<(u32, u32, u32)>,
    pub allocs: Vec<(usize, u32, u32, u32, bool)>,
    pub transfers: Vec<(usize, usize, u32, u32, i8, bool)>,
    pub failures: Vec<(u8, usize, usize, u32, u32)>,
    pub baseline: bool,
    pub slots: Option<usize>,
}

pub fn draws() -> impl Strategy<Value = Draw> {
    (
        prop::collection::vec((10u32..200, 1u32..20, 1u32..20), 2..5),
        prop::collection::vec((0usize..8, 1u32..120, 1u32..60, 0u32..40, any::<bool>()), 0..8),
        prop::collection::vec((0usize..8, 0usize..8, 1u32..40, 0u32..30, -3i8..3, any::<bool>()), 1..12),
        prop::collection::vec((0u8..3, 0usize..8, 0usize..8, 0u32..40, 1u32..10), 0..4),
        any::<bool>(),
        prop::option::of(1usize..3),
    )
        .prop_map(|(sites, allocs, transfers, failures, baseline, slots)| Draw {
            sites,
            allocs,
            transfers,
            failures,
            baseline,
            slots,
        })
}

pub fn build(d: &Draw, with_allocs: bool) -> Scenario {
    let n = d.sites.len();
    let name = |i: usize| format!("S{}", i % n);
    let sites = d
        .sites
        .iter()
        .enumerate()
        .map(|(i, &(cap, inb, outb))| StorageSite {
            id: name(i),
            capacity: cap as f64 * GB,
            ingress_bw: inb as f64 * GB,
            egress_bw: outb as f64 * GB,
            backend: false,
        })
        .collect();
    let allocations: Vec<AllocationRequest> = if with_allocs {
        d.allocs
            .iter()
            .enumerate()
            .map(|(i, &(s, size, dur, at, wait))| AllocationRequest {
                id: format!("a{i}"),
                site: name(s),
                size: size as f64 * GB,
                duration: dur as f64,
                acl: vec![AclEntry {
                    principal: "vo".into(),
                    permission: Permission::Write,
                }],
                at: at as f64,
                wait,
            })
            .collect()
    } else {
        vec![]
    };
    let transfers = d
        .transfers
        .iter()
        .enumerate()
        .map(|(i, &(src, dst, size, at, priority, to_alloc))| {
            let destination = if to_alloc && !allocations.is_empty() {
                Endpoint::Allocation(format!("a{}", dst % allocations.len()))
            } else {
                Endpoint::Site(name(dst))
            };
            TransferJob {
                id: format!("t{i}"),
                source: Endpoint::Site(name(src)),
                destination,
                size: size as f64 * GB,
                owner: "vo".into(),
                priority: priority as i64,
                order: None,
                at: at as f64,
            }
        })
        .collect();
    let failures = d
        .failures
        .iter()
        .map(|&(k, s, p, at, dur)| {
            let kind = [FailureKind::LinkDown, FailureKind::SiteDown, FailureKind::DiskOverflow][k as usize];
            FailureSpec {
                kind,
                site: name(s),
                peer: (kind == FailureKind::LinkDown && s % n != p % n).then(|| name(p)),
                at: at as f64,
                duration: dur as f64,
            }
        })
        .collect();
    Scenario {
        sites,
        policy: PlacementPolicy {
            mode: if d.baseline { Mode::LossyPriorityBaseline } else { Mode::Managed },
            queue_capacity: d.baseline.then_some(2),
            slots_per_site: d.slots,
            ..PlacementPolicy::default()
        },
        allocations,
        transfers,
        replications: vec![],
        failures,
        until: f64::INFINITY,
    }
}

pub fn check_log_order(out: &SimOutput) -> Result<(), TestCaseError> {
    for w in out.log.windows(2) {
        prop_assert!(w[0].time <= w[1].time);
        prop_assert!(w[0].seq < w[1].seq);
    }
    Ok(())
}

/// Granted allocations on a site never sum past its capacity, replayed
/// from the grant and expiry events.
pub fn capacity_safety(d: &Draw) -> Result<(), TestCaseError> {
    let s = build(d, true);
    let out = simulate(&s).unwrap();
    let capacity: BTreeMap<&str, f64> = s.sites.iter().map(|x| (x.id.as_str(), x.capacity)).collect();
    let mut held: BTreeMap<String, f64> = BTreeMap::new();
    for e in &out.log {
        let sign = match e.kind {
            EventKind::AllocGranted => 1.0,
            EventKind::AllocExpired => -1.0,
            _ => continue,
        };
        let site = e.detail["site"].as_str().unwrap().to_string();
        let size = e.detail["size"].as_f64().unwrap();
        let h = held.entry(site.clone()).or_default();
        *h += sign * size;
        prop_assert!(*h <= capacity[site.as_str()] * (1.0 + 1e-12), "site {site} holds {h}");
    }
    check_log_order(&out)
}

pub fn byte_conservation(d: &Draw) -> Result<(), TestCaseError> {
    let out = simulate(&build(d, true)).unwrap();
    for j in &out.jobs {
        prop_assert!(j.bytes_moved <= j.size);
        if j.state == JobState::Done {
            prop_assert_eq!(j.bytes_moved, j.size);
        }
    }
    let m = &out.metrics;
    prop_assert!(m.bytes_delivered + m.bytes_abandoned <= m.bytes_submitted * (1.0 + 1e-12));
    let logged: f64 = out
        .log
        .iter()
        .filter(|e| e.kind == EventKind::TransferComplete)
        .map(|e| e.detail["bytes"].as_f64().unwrap())
        .sum();
    prop_assert!((logged - m.bytes_delivered).abs() <= 1e-6 * m.bytes_delivered.max(1.0));
    prop_assert!((0.0..=1.0).contains(&m.drop_rate));
    Ok(())
}

// --------------------------------------------------------------- regression

pub fn regression_draws() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-10.0f64..10.0, 60),
        prop::collection::vec(-10.0f64..10.0, 12),
    )
}

pub fn columns(n: usize, p: usize, seed: &[f64]) -> Vec<(String, Vec<f64>)> {
    (0..p)
        .map(|j| (format!("x{j}"), (0..n).map(|i| seed[(i * p + j) % seed.len()]).collect()))
        .collect()
}

/// R² along a chain of nested models never decreases. The chain stops at
/// the first rank-deficient model.
pub fn nested_r_square((data, y): &(Vec<f64>, Vec<f64>)) -> Result<(), TestCaseError> {
    let all = columns(12, 5, data);
    let mut prev = 0.0;
    for k in 1..=all.len() {
        let fit = match fit_ols("y", &all[..k], y) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        let r2 = fit.summary().r_square;
        prop_assert!(r2 >= prev - 1e-10, "R² fell from {prev} to {r2} at k={k}");
        prev = r2;
    }
    Ok(())
}

// -------------------------------------------------------------------- chunk

#[derive(Debug, Clone)]
pub struct CsvCase {
    /// (group key, real value or missing, text tag)
    pub rows: Vec<(i64, Option<f64>, u8)>,
    pub chunk_size: usize,
    pub workers: usize,
    pub failures: Vec<(bool, usize)>,
}

pub fn csv_cases() -> impl Strategy<Value = CsvCase> {
    prop::collection::vec((0i64..4, prop::option::weighted(0.8, -1e3f64..1e3), 0u8..3), 1..40)
        .prop_flat_map(|rows| {
            let n = rows.len();
            (
                Just(rows),
                1..=n + 1,
                1usize..4,
                prop::collection::vec((any::<bool>(), 0usize..8), 0..3),
            )
        })
        .prop_map(|(rows, chunk_size, workers, failures)| CsvCase {
            rows,
            chunk_size,
            workers,
            failures,
        })
}

fn write_csv(rows: &[(i64, Option<f64>, u8)]) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    writeln!(f, "k,v,tag").unwrap();
    for (k, v, tag) in rows {
        let v = v.map_or("NA".to_string(), |x| format!("{x:?}"));
        writeln!(f, "{k},{v},t{tag}").unwrap();
    }
    f.flush().unwrap();
    f
}

fn open(path: &std::path::Path, chunk_size: usize) -> Datastore {
    let options = DatastoreOptions {
        chunk_size,
        type_overrides: [("k".to_string(), ColumnType::Integer), ("v".to_string(), ColumnType::Real)].into(),
        ..DatastoreOptions::default()
    };
    Datastore::open(&[path], &options).unwrap()
}

/// Aggregates and per-column missing counts do not depend on chunk size,
/// worker count or injected task failures below the attempt cap.
pub fn chunk_invariance(case: &CsvCase) -> Result<(), TestCaseError> {
    let file = write_csv(&case.rows);
    let whole = open(file.path(), case.rows.len() + 1);
    let chunked = open(file.path(), case.chunk_size);
    let plain = MapReduceOptions {
        workers: 1,
        ..MapReduceOptions::default()
    };
    let stressed = MapReduceOptions {
        workers: case.workers,
        injected_failures: case
            .failures
            .iter()
            .map(|&(reduce, task)| InjectedFailure {
                phase: if reduce { Phase::Reduce } else { Phase::Map },
                task,
                failures: 2,
            })
            .collect(),
        ..MapReduceOptions::default()
    };
    let funcs = [Aggregate::Count, Aggregate::Sum, Aggregate::Mean, Aggregate::Min, Aggregate::Max];
    for aggregate_fn in funcs {
        for group_by in [None, Some("k"), Some("tag")] {
            for missing in [MissingPolicy::Skip, MissingPolicy::Propagate] {
                let spec = AggregateSpec {
                    aggregate: aggregate_fn,
                    value: Some("v".into()),
                    group_by: group_by.map(String::from),
                    missing,
                };
                let (expected, _) = aggregate(&whole, &spec, &plain).unwrap();
                let (got, _) = aggregate(&chunked, &spec, &stressed).unwrap();
                prop_assert_eq!(got.to_json(), expected.to_json(), "{:?}", spec);
            }
        }
    }
    let mut missing = [0usize; 3];
    for chunk in chunked.chunks() {
        let chunk = chunk.unwrap();
        for (m, col) in missing.iter_mut().zip(chunk.table.columns()) {
            *m += col.missing_count();
        }
    }
    let all = whole.read_all().unwrap();
    let expected: Vec<usize> = all.columns().iter().map(|c| c.missing_count()).collect();
    prop_assert_eq!(missing.to_vec(), expected);
    let absent = case.rows.iter().filter(|r| r.1.is_none()).count();
    prop_assert_eq!(missing[1], absent);
    Ok(())
}

// ------------------------------------------------------------------- config

const BYTE_UNITS: [(&str, f64); 5] = [("B", 1.0), ("kB", 1e3), ("MB", 1e6), ("GB", 1e9), ("TB", 1e12)];
const RATE_UNITS: [(&str, f64); 4] = [("B/s", 1.0), ("MB/s", 1e6), ("GB/s", 1e9), ("TB/s", 1e12)];
const TIME_UNITS: [(&str, f64); 4] = [("s", 1.0), ("ms", 1e-3), ("min", 60.0), ("h", 3600.0)];
const WATT_UNITS: [(&str, f64); 2] = [("W", 1.0), ("kW", 1e3)];
const IDLE_UNITS: [(&str, f64); 1] = [("W", 1.0)];

/// A quantity written as `"{mantissa}{unit}"` and its SI value.
fn quantity(units: &'static [(&'static str, f64)], lo: u32, hi: u32) -> impl Strategy<Value = (String, f64)> {
    (lo..hi, 0..units.len(), any::<bool>()).prop_map(move |(m, u, spaced)| {
        let (unit, scale) = units[u];
        let sep = if spaced { " " } else { "" };
        (format!("{m}{sep}{unit}"), m as f64 * scale)
    })
}

#[derive(Debug, Clone)]
pub struct ConfigCase {
    pub document: Value,
    /// (JSON pointer, expected SI value) for every unit-suffixed field.
    pub expected: Vec<(String, f64)>,
}

fn plan_case() -> impl Strategy<Value = ConfigCase> {
    (
        (1u64..100_000, quantity(&RATE_UNITS, 1, 1000), quantity(&RATE_UNITS, 1, 1000)),
        (quantity(&RATE_UNITS, 1, 1000), quantity(&RATE_UNITS, 1, 1000), quantity(&BYTE_UNITS, 1, 1000)),
        // p_active >= 5 W > p_idle
        (quantity(&WATT_UNITS, 5, 10), quantity(&IDLE_UNITS, 0, 5)),
        (quantity(&BYTE_UNITS, 0, 1000), quantity(&BYTE_UNITS, 0, 1000), 0u32..5, quantity(&TIME_UNITS, 1, 1000), 0.0f64..=1.0),
        prop::collection::vec(("[a-z]{1,8}", quantity(&RATE_UNITS, 1, 1000)), 0..3),
    )
        .prop_map(|((n, pfs, h2s), (fm2c, c2m, c_ssd), (pa, pi), (la, lc, chk, iv, alpha), kernels)| {
            let mut expected = vec![
                ("/plan/cluster/bw_pfs".to_string(), pfs.1),
                ("/plan/cluster/bw_host2ssd".into(), h2s.1),
                ("/plan/cluster/bw_fm2c".into(), fm2c.1),
                ("/plan/cluster/bw_c2m".into(), c2m.1),
                ("/plan/cluster/c_ssd".into(), c_ssd.1),
                ("/plan/cluster/p_active".into(), pa.1),
                ("/plan/cluster/p_idle".into(), pi.1),
                ("/plan/workload/lambda_a".into(), la.1),
                ("/plan/workload/lambda_c".into(), lc.1),
                ("/plan/workload/interval".into(), iv.1),
            ];
            for (i, k) in kernels.iter().enumerate() {
                expected.push((format!("/plan/kernels/{i}/throughput"), k.1 .1));
            }
            let document = json!({
                "schema_version": 1,
                "subcommand": "plan",
                "plan": {
                    "cluster": {
                        "n_compute": n, "bw_pfs": pfs.0, "bw_host2ssd": h2s.0, "bw_fm2c": fm2c.0,
                        "bw_c2m": c2m.0, "c_ssd": c_ssd.0, "p_active": pa.0, "p_idle": pi.0
                    },
                    "workload": {"lambda_a": la.0, "lambda_c": lc.0, "num_chkpts": chk, "interval": iv.0, "alpha": alpha},
                    "kernels": kernels.iter().map(|(name, t)| json!({"name": name, "throughput": t.0})).collect::<Vec<_>>(),
                }
            });
            ConfigCase { document, expected }
        })
}

fn datastore_block() -> impl Strategy<Value = Value> {
    (1usize..5000, prop::collection::vec("[A-Z?]{1,3}", 0..2), 1usize..5000)
        .prop_map(|(chunk_size, missing_tokens, infer_rows)| {
            json!({"chunk_size": chunk_size, "missing_tokens": missing_tokens, "infer_rows": infer_rows,
                   "type_overrides": {"v": "real"}})
        })
}

fn other_case() -> impl Strategy<Value = ConfigCase> {
    let simulate = (draws(), prop::option::of(any::<bool>())).prop_map(|(d, mode)| {
        let mut block = json!({"scenario": serde_json::to_value(build(&d, true)).unwrap()});
        if let Some(managed) = mode {
            block["mode"] = json!(if managed { "managed" } else { "lossy-priority-baseline" });
        }
        json!({"schema_version": 1, "subcommand": "simulate", "simulate": block})
    });
    let mapreduce = (
        prop::collection::vec("[a-z]{1,6}\\.csv", 1..3),
        datastore_block(),
        prop::option::of(1usize..16),
        1u32..6,
        prop::collection::vec((0usize..5, prop::option::of("[A-Za-z]{1,5}"), any::<bool>()), 1..4),
    )
        .prop_map(|(inputs, ds, workers, attempts, aggs)| {
            let names = ["count", "sum", "mean", "min", "max"];
            let aggregates: Vec<Value> = aggs
                .into_iter()
                .map(|(f, group, propagate)| {
                    let mut a = json!({"aggregate": names[f], "value": "v",
                                       "missing": if propagate { "propagate" } else { "skip" }});
                    if let Some(g) = group {
                        a["group_by"] = json!(g);
                    }
                    a
                })
                .collect();
            let mut block = json!({"inputs": inputs, "datastore": ds, "max_attempts": attempts, "aggregates": aggregates});
            if let Some(w) = workers {
                block["workers"] = json!(w);
            }
            json!({"schema_version": 1, "subcommand": "mapreduce", "mapreduce": block})
        });
    let regress = (1u8..4, any::<bool>(), any::<bool>(), datastore_block()).prop_map(|(preset, custom, compare, ds)| {
        let mut block = json!({"input": "w.csv", "compare_reference": compare, "datastore": ds});
        if custom {
            block["model"] = json!({"response": "DW", "predictors": ["MS", "RE"]});
            block["binary_columns"] = json!(["MS", "RE"]);
        } else {
            block["preset"] = json!(preset);
        }
        json!({"schema_version": 1, "subcommand": "regress", "regress": block})
    });
    let design = (prop::option::of(prop::collection::vec("[a-z]{1,4}", 1..4)), 0.05f64..=1.0, datastore_block())
        .prop_map(|(cols, threshold, ds)| {
            let mut block = json!({"input": "t.csv", "threshold": threshold, "datastore": ds});
            if let Some(c) = cols {
                block["columns"] = json!(c);
            }
            json!({"schema_version": 1, "subcommand": "design-schema", "design_schema": block})
        });
    prop_oneof![simulate, mapreduce, regress, design].prop_map(|document| ConfigCase {
        document,
        expected: vec![],
    })
}

pub fn config_cases() -> impl Strategy<Value = ConfigCase> {
    prop_oneof![plan_case(), other_case()]
}

/// parse → serialize → parse is a fixed point, and every unit string
/// normalizes to its SI value.
pub fn config_round_trip(case: &ConfigCase) -> Result<(), TestCaseError> {
    let parsed = RunConfig::from_value(case.document.clone()).map_err(|e| TestCaseError::fail(format!("{e}")))?;
    let text = parsed.to_json_string();
    let again = RunConfig::from_json_str(&text).map_err(|e| TestCaseError::fail(format!("{e}: {text}")))?;
    prop_assert_eq!(&again, &parsed);
    prop_assert_eq!(again.to_json_string(), text.clone());
    let normalized: Value = serde_json::from_str(&text).unwrap();
    for (pointer, si) in &case.expected {
        let got = normalized.pointer(pointer).and_then(Value::as_f64);
        prop_assert_eq!(got, Some(*si), "{}", pointer);
    }
    Ok(())
}

// ------------------------------------------------------------------ staging

/// A valid planning input with a positive staging ratio and at least
/// `slack` of the interval left after transfers at that ratio.
#[derive(Debug, Clone)]
pub struct StagingCase {
    pub cluster: dwstage::staging::ClusterConfig,
    pub workload: dwstage::staging::Workload,
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

pub fn staging_cases() -> impl Strategy<Value = StagingCase> {
    (
        (1u64..200_000, log_uniform(1e8, 1e10), log_uniform(1e8, 1e10), log_uniform(1e8, 1e10)),
        (log_uniform(1.0, 1e3), log_uniform(1.0, 1e3), 1.0f64..20.0, 0.0f64..1.0),
        (log_uniform(1e6, 1e10), log_uniform(1e6, 1e11), 0u32..4, 0.0f64..=1.0, 0.01f64..0.99),
    )
        .prop_map(|((n, h2s, fm2c, c2m), (bw_ratio, cap_ratio, p_active, idle_frac), (la, lc, chk, alpha, slack))| {
            use dwstage::staging::{ClusterConfig, Workload};
            // s_bandwidth and s_capacity are both at least 1 by construction
            let footprint = la + chk as f64 * lc;
            let cluster = ClusterConfig {
                n_compute: n,
                bw_pfs: n as f64 * h2s / bw_ratio,
                bw_host2ssd: h2s,
                bw_fm2c: fm2c,
                bw_c2m: c2m,
                c_ssd: footprint * cap_ratio,
                p_active,
                p_idle: p_active * idle_frac,
            };
            let mut workload = Workload {
                lambda_a: la,
                lambda_c: lc,
                num_chkpts: chk,
                interval: 1.0,
                alpha,
            };
            let s = dwstage::staging::staging_ratio(&cluster, &workload).unwrap() as f64;
            let transfers = la * s * (1.0 / fm2c + 1.0 / c2m) + n as f64 * (alpha * la + lc) / cluster.bw_pfs;
            workload.interval = transfers / (1.0 - slack);
            StagingCase { cluster, workload }
        })
}

/// Independent bisection for the smallest feasible kernel throughput.
pub fn bisect_threshold(case: &StagingCase, s: u64) -> f64 {
    use dwstage::staging::{check_feasible, AnalysisKernel};
    let feasible = |t: f64| check_feasible(&case.cluster, &case.workload, s, &AnalysisKernel::new("k", t));
    let (mut lo, mut hi) = (1e-300, 1.0);
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo) > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// The feasibility verdict flips across `t_ssd_min` within a relative
/// width of 1e-6, and bisection finds the same point to 1e-9.
pub fn threshold_tightness(case: &StagingCase) -> Result<(), TestCaseError> {
    use dwstage::staging::{check_feasible, min_kernel_throughput, staging_ratio, AnalysisKernel};
    let (c, w) = (&case.cluster, &case.workload);
    let s = staging_ratio(c, w).unwrap();
    let t = min_kernel_throughput(c, w, s).unwrap();
    prop_assert!(check_feasible(c, w, s, &AnalysisKernel::new("above", t * (1.0 + 1e-6))));
    prop_assert!(!check_feasible(c, w, s, &AnalysisKernel::new("below", t * (1.0 - 1e-6))));
    let b = bisect_threshold(case, s);
    prop_assert!(((b - t) / t).abs() <= 1e-9, "bisection {b} vs closed form {t}");
    Ok(())
}

// ---------------------------------------------------------------------- pca

/// Correlation matrix (row-major) of the normalized Gram matrix of
/// `vectors`, built without the library's correlation routine.
pub fn gram_correlation(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        c[i * n + i] = 1.0;
        for j in 0..i {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            c[i * n + j] = r;
            c[j * n + i] = r;
        }
    }
    c
}

pub fn correlation_draws(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n + 3), n)
            .prop_filter("vectors need length", |vs| vs.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3))
    })
}

/// V·diag(λ)·Vᵀ reproduces the input within 1e-8 and V is orthonormal
/// within 1e-10.
pub fn reconstruction(vectors: &[Vec<f64>]) -> Result<(), TestCaseError> {
    use dwstage::pca::{extract_factors, CorrelationMatrix};
    let n = vectors.len();
    let values = gram_correlation(vectors);
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let pca = extract_factors(&CorrelationMatrix::new(names, values.clone()).unwrap()).unwrap();
    for i in 0..n {
        for j in 0..n {
            let r: f64 = (0..n).map(|k| pca.eigenvalues[k] * pca.eigenvectors[k][i] * pca.eigenvectors[k][j]).sum();
            prop_assert!((r - values[i * n + j]).abs() < 1e-8, "({i},{j}): {r} vs {}", values[i * n + j]);
            let dot: f64 = (0..n).map(|k| pca.eigenvectors[i][k] * pca.eigenvectors[j][k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            prop_assert!((dot - want).abs() < 1e-10, "loadings {i},{j}: {dot}");
        }
    }
    Ok(())
}
