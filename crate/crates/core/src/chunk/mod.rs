//! Chunk-based datastore over delimited text and a MapReduce executor.

mod datastore;
mod mapreduce;
mod table;

use std::path::PathBuf;

use thiserror::Error;

pub use datastore::{parse_value, Chunk, ChunkIter, ChunkRef, Datastore, DatastoreOptions, MalformedValue};
pub use mapreduce::{
    aggregate, log_to_jsonl, mapreduce, Aggregate, AggregateSpec, GroupKey, InjectedFailure, MapReduceOptions,
    MapReduceOutput, MissingPolicy, Phase, TaskEvent, TaskEventKind, DEFAULT_MAX_ATTEMPTS,
};
pub use table::{Column, ColumnData, ColumnType, DataTable, Field, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChunkError {
    #[error("source file {0:?} does not exist")]
    MissingFile(PathBuf),
    #[error("{path:?}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path:?}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Csv {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("{path:?} has header {found:?}, expected {expected:?}")]
    InconsistentHeader {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path:?} line {line}, column {column:?}: {source}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        source: MalformedValue,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("{phase} task {task} failed permanently after {attempts} attempts: {message}")]
    TaskFailed {
        phase: Phase,
        task: usize,
        attempts: u32,
        message: String,
    },
}
