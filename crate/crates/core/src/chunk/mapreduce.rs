//! MapReduce over datastore chunks.
//!
//! One map task per chunk, scheduled onto a worker pool. A map task's output
//! is published only when the task finishes, partitioned by key hash. The
//! reduce phase is not queued until every map task is done. Failed tasks,
//! including panics in user functions, are re-executed from their input (the
//! chunk is re-read from its source file) up to the attempt cap. The final
//! result is sorted by key, so it does not depend on worker count, chunk
//! size, or completion order.

use std::collections::{BTreeMap, VecDeque};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use super::datastore::Datastore;
use super::table::{Column, DataTable};
use super::ChunkError;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Map,
    Reduce,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Map => "map",
            Phase::Reduce => "reduce",
        })
    }
}

/// Test hook: make the first `failures` attempts of a task fail after doing
/// their work but before publishing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectedFailure {
    pub phase: Phase,
    pub task: usize,
    pub failures: u32,
}

#[derive(Debug, Clone)]
pub struct MapReduceOptions {
    pub workers: usize,
    pub max_attempts: u32,
    /// Reduce partitions; defaults to the worker count.
    pub reduce_partitions: Option<usize>,
    #[doc(hidden)]
    pub injected_failures: Vec<InjectedFailure>,
}

impl Default for MapReduceOptions {
    fn default() -> Self {
        MapReduceOptions {
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            reduce_partitions: None,
            injected_failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskEventKind {
    Queued,
    Started,
    Failed,
    Done,
    /// Every map task has completed; reduce tasks may now be queued.
    Barrier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub seq: u64,
    pub phase: Phase,
    pub kind: TaskEventKind,
    pub task: Option<usize>,
    pub attempt: u32,
    pub worker: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Ordered record of scheduler decisions.
#[derive(Debug, Default)]
pub struct SchedulerLog {
    events: Mutex<Vec<TaskEvent>>,
}

impl SchedulerLog {
    fn record(
        &self,
        phase: Phase,
        kind: TaskEventKind,
        task: Option<usize>,
        attempt: u32,
        worker: Option<usize>,
        error: Option<String>,
    ) {
        let mut events = self.events.lock().expect("scheduler log poisoned");
        let seq = events.len() as u64;
        events.push(TaskEvent {
            seq,
            phase,
            kind,
            task,
            attempt,
            worker,
            error,
        });
    }

    fn into_events(self) -> Vec<TaskEvent> {
        self.events.into_inner().expect("scheduler log poisoned")
    }
}

/// JSON lines, one event per line.
pub fn log_to_jsonl(events: &[TaskEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("task event serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug)]
pub struct MapReduceOutput<K, R> {
    /// One row per key, sorted by key.
    pub rows: Vec<(K, R)>,
    pub log: Vec<TaskEvent>,
    pub map_tasks: usize,
    pub reduce_tasks: usize,
}

struct Queue {
    pending: VecDeque<(usize, u32)>,
    closed: bool,
}

struct TaskResult<T> {
    task: usize,
    attempt: u32,
    worker: usize,
    outcome: Result<T, String>,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".into()
    }
}

/// Runs `n_tasks` tasks on `workers` threads with retry. Returns outputs in
/// task order once all tasks are done.
fn run_phase<T, F>(
    phase: Phase,
    n_tasks: usize,
    workers: usize,
    max_attempts: u32,
    injected: &[InjectedFailure],
    log: &SchedulerLog,
    work: F,
) -> Result<Vec<T>, ChunkError>
where
    T: Send,
    F: Fn(usize) -> Result<T, String> + Sync,
{
    if n_tasks == 0 {
        return Ok(Vec::new());
    }
    let mut inject = vec![0u32; n_tasks];
    for f in injected.iter().filter(|f| f.phase == phase && f.task < n_tasks) {
        inject[f.task] += f.failures;
    }

    let queue = Mutex::new(Queue {
        pending: (0..n_tasks).map(|t| (t, 1)).collect(),
        closed: false,
    });
    for t in 0..n_tasks {
        log.record(phase, TaskEventKind::Queued, Some(t), 1, None, None);
    }
    let ready = Condvar::new();
    let (tx, rx) = mpsc::channel::<TaskResult<T>>();

    thread::scope(|scope| {
        for worker in 0..workers.max(1).min(n_tasks) {
            let tx = tx.clone();
            let (queue, ready, work, inject) = (&queue, &ready, &work, &inject);
            scope.spawn(move || loop {
                let (task, attempt) = {
                    let mut q = queue.lock().expect("task queue poisoned");
                    loop {
                        if let Some(next) = q.pending.pop_front() {
                            break next;
                        }
                        if q.closed {
                            return;
                        }
                        q = ready.wait(q).expect("task queue poisoned");
                    }
                };
                log.record(phase, TaskEventKind::Started, Some(task), attempt, Some(worker), None);
                let outcome = match panic::catch_unwind(AssertUnwindSafe(|| work(task))) {
                    Ok(r) => r,
                    Err(payload) => Err(panic_message(payload)),
                };
                let outcome = match outcome {
                    Ok(_) if attempt <= inject[task] => Err(format!("injected failure {attempt}")),
                    other => other,
                };
                if tx
                    .send(TaskResult {
                        task,
                        attempt,
                        worker,
                        outcome,
                    })
                    .is_err()
                {
                    return;
                }
            });
        }
        drop(tx);

        let mut outputs: Vec<Option<T>> = (0..n_tasks).map(|_| None).collect();
        let mut done = 0;
        let mut failure = None;
        while done < n_tasks {
            let Ok(result) = rx.recv() else { break };
            match result.outcome {
                Ok(value) => {
                    debug_assert!(outputs[result.task].is_none(), "done task re-run");
                    outputs[result.task] = Some(value);
                    done += 1;
                    log.record(phase, TaskEventKind::Done, Some(result.task), result.attempt, Some(result.worker), None);
                }
                Err(message) => {
                    log.record(
                        phase,
                        TaskEventKind::Failed,
                        Some(result.task),
                        result.attempt,
                        Some(result.worker),
                        Some(message.clone()),
                    );
                    if result.attempt >= max_attempts {
                        failure = Some(ChunkError::TaskFailed {
                            phase,
                            task: result.task,
                            attempts: result.attempt,
                            message,
                        });
                        break;
                    }
                    let next = result.attempt + 1;
                    log.record(phase, TaskEventKind::Queued, Some(result.task), next, None, None);
                    queue
                        .lock()
                        .expect("task queue poisoned")
                        .pending
                        .push_back((result.task, next));
                    ready.notify_one();
                }
            }
        }
        {
            let mut q = queue.lock().expect("task queue poisoned");
            q.closed = true;
            q.pending.clear();
        }
        ready.notify_all();
        match failure {
            Some(e) => Err(e),
            None => Ok(outputs.into_iter().map(|o| o.expect("all tasks done")).collect()),
        }
    })
}

fn partition_of<K: Hash>(key: &K, partitions: usize) -> usize {
    // DefaultHasher::new() uses fixed keys, so partitioning is reproducible.
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    (h.finish() % partitions as u64) as usize
}

/// Applies `map` to every chunk and `reduce` to the grouped values of every
/// key. Values reach `reduce` in chunk order.
pub fn mapreduce<K, V, R, M, Rd>(
    ds: &Datastore,
    map: M,
    reduce: Rd,
    options: &MapReduceOptions,
) -> Result<MapReduceOutput<K, R>, ChunkError>
where
    K: Ord + Hash + Clone + Send + Sync,
    V: Clone + Send + Sync,
    R: Send,
    M: Fn(&DataTable) -> Result<Vec<(K, V)>, String> + Sync,
    Rd: Fn(&K, &[V]) -> Result<R, String> + Sync,
{
    if options.max_attempts < 1 {
        return Err(ChunkError::InvalidOption("max_attempts must be >= 1".into()));
    }
    let workers = options.workers.max(1);
    let partitions = options.reduce_partitions.unwrap_or(workers).max(1);
    let refs = ds.chunk_refs()?;
    let log = SchedulerLog::default();

    let map_outputs: Vec<Vec<Vec<(K, V)>>> = run_phase(
        Phase::Map,
        refs.len(),
        workers,
        options.max_attempts,
        &options.injected_failures,
        &log,
        |task| {
            let chunk = ds.read_chunk(&refs[task]).map_err(|e| e.to_string())?;
            let emitted = map(&chunk.table)?;
            let mut parts: Vec<Vec<(K, V)>> = (0..partitions).map(|_| Vec::new()).collect();
            for (k, v) in emitted {
                parts[partition_of(&k, partitions)].push((k, v));
            }
            Ok(parts)
        },
    )?;

    log.record(Phase::Map, TaskEventKind::Barrier, None, 0, None, None);

    let reduce_outputs: Vec<Vec<(K, R)>> = run_phase(
        Phase::Reduce,
        partitions,
        workers,
        options.max_attempts,
        &options.injected_failures,
        &log,
        |part| {
            // The store stays immutable so a retried reduce task sees the same input.
            let mut groups: BTreeMap<&K, Vec<V>> = BTreeMap::new();
            for task_output in &map_outputs {
                for (k, v) in &task_output[part] {
                    groups.entry(k).or_default().push(v.clone());
                }
            }
            groups
                .into_iter()
                .map(|(k, vs)| reduce(k, &vs).map(|r| (k.clone(), r)))
                .collect()
        },
    )?;

    let mut rows: Vec<(K, R)> = reduce_outputs.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(MapReduceOutput {
        rows,
        log: log.into_events(),
        map_tasks: refs.len(),
        reduce_tasks: partitions,
    })
}

/// What to do with missing (NaN) values in numeric aggregations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Ignore missing values.
    #[default]
    Skip,
    /// Any missing value makes the result missing.
    Propagate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Count,
    Sum,
    Mean,
    Min,
    Max,
}

impl Aggregate {
    /// Folds values under the missing policy. `Count` counts non-missing
    /// values (or all values under `Propagate`).
    pub fn apply(self, values: &[f64], policy: MissingPolicy) -> f64 {
        let has_missing = values.iter().any(|v| v.is_nan());
        if self != Aggregate::Count && policy == MissingPolicy::Propagate && has_missing {
            return f64::NAN;
        }
        let present = values.iter().copied().filter(|v| !v.is_nan());
        match self {
            Aggregate::Count => match policy {
                MissingPolicy::Skip => present.count() as f64,
                MissingPolicy::Propagate => values.len() as f64,
            },
            Aggregate::Sum => present.sum(),
            Aggregate::Mean => {
                let (n, s) = present.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
                if n == 0 {
                    f64::NAN
                } else {
                    s / n as f64
                }
            }
            Aggregate::Min => present.reduce(f64::min).unwrap_or(f64::NAN),
            Aggregate::Max => present.reduce(f64::max).unwrap_or(f64::NAN),
        }
    }
}

/// Grouping key for [`aggregate`]: the group column's rendered value, or a
/// single group when no column is given.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    All,
    Integer(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateSpec {
    pub aggregate: Aggregate,
    /// Column aggregated; optional for `count`, which then counts rows.
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub group_by: Option<String>,
    #[serde(default)]
    pub missing: MissingPolicy,
}

/// Group-by aggregation as a MapReduce job. The result table has a `key`
/// column (omitted without `group_by`) and a real `value` column.
pub fn aggregate(ds: &Datastore, spec: &AggregateSpec, options: &MapReduceOptions) -> Result<(DataTable, Vec<TaskEvent>), ChunkError> {
    let schema = ds.schema();
    let find = |name: &str| {
        schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| ChunkError::UnknownColumn(name.to_string()))
    };
    let value_idx = match &spec.value {
        Some(v) => Some(find(v)?),
        None if spec.aggregate == Aggregate::Count => None,
        None => return Err(ChunkError::InvalidOption(format!("{:?} needs a value column", spec.aggregate))),
    };
    if let Some(i) = value_idx {
        if schema[i].ty == super::table::ColumnType::Text && spec.aggregate != Aggregate::Count {
            return Err(ChunkError::InvalidOption(format!(
                "column {:?} is text and cannot be aggregated numerically",
                schema[i].name
            )));
        }
    }
    let group_idx = spec.group_by.as_deref().map(find).transpose()?;

    let out = mapreduce(
        ds,
        |chunk: &DataTable| {
            let cols = chunk.columns();
            Ok((0..chunk.num_rows())
                .map(|row| {
                    let key = match group_idx {
                        None => GroupKey::All,
                        Some(g) => match cols[g].value(row) {
                            super::table::Value::Integer(x) => GroupKey::Integer(x),
                            super::table::Value::Missing => GroupKey::Text("NA".into()),
                            super::table::Value::Real(x) => GroupKey::Text(x.to_string()),
                            super::table::Value::Text(s) => GroupKey::Text(s),
                        },
                    };
                    let value = match value_idx {
                        None => 1.0,
                        Some(v) if spec.aggregate == Aggregate::Count => {
                            if cols[v].is_missing(row) {
                                f64::NAN
                            } else {
                                1.0
                            }
                        }
                        Some(v) => cols[v].f64_at(row),
                    };
                    (key, value)
                })
                .collect())
        },
        |_key: &GroupKey, values: &[f64]| Ok(spec.aggregate.apply(values, spec.missing)),
        options,
    )?;

    let values = Column::from_reals("value", out.rows.iter().map(|(_, v)| *v).collect());
    let table = match group_idx {
        None => DataTable::from_columns(vec![values]),
        Some(_) => {
            let all_int = out.rows.iter().all(|(k, _)| matches!(k, GroupKey::Integer(_)));
            let key_col = if all_int {
                Column::from_integers(
                    "key",
                    out.rows
                        .iter()
                        .map(|(k, _)| if let GroupKey::Integer(x) = k { *x } else { 0 })
                        .collect(),
                )
            } else {
                Column::from_texts(
                    "key",
                    out.rows
                        .iter()
                        .map(|(k, _)| match k {
                            GroupKey::All => String::new(),
                            GroupKey::Integer(x) => x.to_string(),
                            GroupKey::Text(s) => s.clone(),
                        })
                        .collect(),
                )
            };
            DataTable::from_columns(vec![key_col, values])
        }
    };
    Ok((table, out.log))
}
