use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{ColumnType, DataTable, Field, Value};
use super::ChunkError;

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_INFER_ROWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatastoreOptions {
    pub chunk_size: usize,
    /// Tokens read as missing, in addition to `NA`.
    pub missing_tokens: Vec<String>,
    /// Forces a column type instead of inferring it.
    pub type_overrides: BTreeMap<String, ColumnType>,
    /// Rows sampled from the start of the first file for type inference.
    pub infer_rows: usize,
}

impl Default for DatastoreOptions {
    fn default() -> Self {
        DatastoreOptions {
            chunk_size: DEFAULT_CHUNK_SIZE,
            missing_tokens: Vec::new(),
            type_overrides: BTreeMap::new(),
            infer_rows: DEFAULT_INFER_ROWS,
        }
    }
}

/// Chunked view over one or more delimited text files sharing a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Datastore {
    sources: Vec<PathBuf>,
    schema: Vec<Field>,
    missing_tokens: Vec<String>,
    chunk_size: usize,
    notes: Vec<String>,
}

/// Location of one chunk: a row range inside a single source file.
#[derive(Debug, Clone)]
pub struct ChunkRef {
    pub file: usize,
    /// Zero-based data row within the file.
    pub first_row: u64,
    pub rows: usize,
    position: csv::Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub file: usize,
    pub first_row: u64,
    pub table: DataTable,
}

fn strip_quotes(token: &str) -> &str {
    let t = token.trim();
    for q in ['\'', '"'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return &t[1..t.len() - 1];
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{token:?} is not a valid {ty} value")]
pub struct MalformedValue {
    pub token: String,
    pub ty: ColumnType,
}

/// Parses one cell. Surrounding quotes are stripped first; tokens listed in
/// `missing_tokens` become [`Value::Missing`].
pub fn parse_value(token: &str, ty: ColumnType, missing_tokens: &[String]) -> Result<Value, MalformedValue> {
    let t = strip_quotes(token);
    if missing_tokens.iter().any(|m| m == t) {
        return Ok(Value::Missing);
    }
    let malformed = || MalformedValue {
        token: token.to_string(),
        ty,
    };
    match ty {
        ColumnType::Integer => t.parse::<i64>().map(Value::Integer).map_err(|_| malformed()),
        ColumnType::Real => t.parse::<f64>().map(Value::Real).map_err(|_| malformed()),
        ColumnType::Text => Ok(Value::Text(t.to_string())),
    }
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.trim(csv::Trim::All);
    b
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, ChunkError> {
    let file = File::open(path).map_err(|e| ChunkError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(reader_builder().from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> ChunkError {
    let line = e.position().map(|p| p.line());
    ChunkError::Csv {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn headers(path: &Path) -> Result<Vec<String>, ChunkError> {
    let mut r = open_reader(path)?;
    let h = r.headers().map_err(|e| csv_error(path, e))?;
    Ok(h.iter().map(str::to_string).collect())
}

#[derive(Clone, Copy)]
struct Inference {
    seen: bool,
    integer: bool,
    real: bool,
}

impl Datastore {
    /// Opens the sources, checks their headers agree, and infers a schema
    /// from a sample of rows: integer if every non-missing sampled token is
    /// an integer, else real if every one is a number, else text. A column
    /// with no non-missing sample is typed as text and noted.
    pub fn open<P: AsRef<Path>>(paths: &[P], options: &DatastoreOptions) -> Result<Self, ChunkError> {
        if options.chunk_size < 1 {
            return Err(ChunkError::InvalidOption("chunk_size must be >= 1".into()));
        }
        if paths.is_empty() {
            return Err(ChunkError::InvalidOption("at least one source file is required".into()));
        }
        let sources: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
        for p in &sources {
            if !p.is_file() {
                return Err(ChunkError::MissingFile(p.clone()));
            }
        }
        let header = headers(&sources[0])?;
        for p in &sources[1..] {
            let h = headers(p)?;
            if h != header {
                return Err(ChunkError::InconsistentHeader {
                    path: p.clone(),
                    expected: header.clone(),
                    found: h,
                });
            }
        }
        for name in options.type_overrides.keys() {
            if !header.contains(name) {
                return Err(ChunkError::UnknownColumn(name.clone()));
            }
        }

        let mut missing_tokens = vec!["NA".to_string()];
        for t in &options.missing_tokens {
            if !missing_tokens.contains(t) {
                missing_tokens.push(t.clone());
            }
        }

        let mut inference = vec![
            Inference {
                seen: false,
                integer: true,
                real: true,
            };
            header.len()
        ];
        let mut reader = open_reader(&sources[0])?;
        for record in reader.records().take(options.infer_rows) {
            let record = record.map_err(|e| csv_error(&sources[0], e))?;
            for (inf, token) in inference.iter_mut().zip(record.iter()) {
                let t = strip_quotes(token);
                if missing_tokens.iter().any(|m| m == t) {
                    continue;
                }
                inf.seen = true;
                inf.integer &= t.parse::<i64>().is_ok();
                inf.real &= t.parse::<f64>().is_ok();
            }
        }

        let mut notes = Vec::new();
        let schema = header
            .iter()
            .zip(&inference)
            .map(|(name, inf)| {
                let ty = if let Some(ty) = options.type_overrides.get(name) {
                    *ty
                } else if !inf.seen {
                    notes.push(format!(
                        "column {name:?} has no non-missing values in the inference sample; typed as text"
                    ));
                    ColumnType::Text
                } else if inf.integer {
                    ColumnType::Integer
                } else if inf.real {
                    ColumnType::Real
                } else {
                    ColumnType::Text
                };
                Field::new(name.clone(), ty)
            })
            .collect();

        Ok(Datastore {
            sources,
            schema,
            missing_tokens,
            chunk_size: options.chunk_size,
            notes,
        })
    }

    pub fn sources(&self) -> &[PathBuf] {
        &self.sources
    }

    pub fn schema(&self) -> &[Field] {
        &self.schema
    }

    pub fn missing_tokens(&self) -> &[String] {
        &self.missing_tokens
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// Inference remarks, such as all-missing columns defaulted to text.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn set_chunk_size(&mut self, chunk_size: usize) -> Result<(), ChunkError> {
        if chunk_size < 1 {
            return Err(ChunkError::InvalidOption("chunk_size must be >= 1".into()));
        }
        self.chunk_size = chunk_size;
        Ok(())
    }

    fn parse_record(&self, path: &Path, record: &csv::StringRecord, table: &mut DataTable) -> Result<(), ChunkError> {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != self.schema.len() {
            return Err(ChunkError::Csv {
                path: path.to_path_buf(),
                line: Some(line),
                message: format!("expected {} fields, found {}", self.schema.len(), record.len()),
            });
        }
        let row = self
            .schema
            .iter()
            .zip(record.iter())
            .map(|(field, token)| {
                parse_value(token, field.ty, &self.missing_tokens).map_err(|e| ChunkError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: field.name.clone(),
                    source: e,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.push_row(row);
        Ok(())
    }

    /// First `min(n, total)` rows. Does not disturb any chunk iteration.
    pub fn preview(&self, n: usize) -> Result<DataTable, ChunkError> {
        let mut out = DataTable::with_schema(&self.schema);
        for chunk in self.chunks() {
            if out.num_rows() >= n {
                break;
            }
            let chunk = chunk?;
            out.append(&chunk.table.head(n - out.num_rows()));
        }
        Ok(out)
    }

    /// Iterates chunks of up to `chunk_size` rows. A chunk never spans two
    /// files, so the last chunk of each file may be short.
    pub fn chunks(&self) -> ChunkIter<'_> {
        ChunkIter {
            ds: self,
            file: 0,
            reader: None,
            row: 0,
        }
    }

    /// Reads every chunk into one table.
    pub fn read_all(&self) -> Result<DataTable, ChunkError> {
        let mut out = DataTable::with_schema(&self.schema);
        for chunk in self.chunks() {
            out.append(&chunk?.table);
        }
        Ok(out)
    }

    /// Scans the sources and records where every chunk starts, without
    /// parsing cell values.
    pub fn chunk_refs(&self) -> Result<Vec<ChunkRef>, ChunkError> {
        let mut refs = Vec::new();
        for (file, path) in self.sources.iter().enumerate() {
            let mut reader = open_reader(path)?;
            reader.headers().map_err(|e| csv_error(path, e))?;
            let mut record = csv::StringRecord::new();
            let mut row = 0u64;
            loop {
                let position = reader.position().clone();
                if !reader.read_record(&mut record).map_err(|e| csv_error(path, e))? {
                    break;
                }
                if row % self.chunk_size as u64 == 0 {
                    refs.push(ChunkRef {
                        file,
                        first_row: row,
                        rows: 0,
                        position,
                    });
                }
                refs.last_mut().expect("chunk started").rows += 1;
                row += 1;
            }
        }
        Ok(refs)
    }

    /// Re-reads one chunk from its source file.
    pub fn read_chunk(&self, chunk: &ChunkRef) -> Result<Chunk, ChunkError> {
        let path = &self.sources[chunk.file];
        let file = File::open(path).map_err(|e| ChunkError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let mut reader = reader_builder().has_headers(false).from_reader(file);
        reader.seek(chunk.position.clone()).map_err(|e| csv_error(path, e))?;
        let mut table = DataTable::with_schema(&self.schema);
        let mut record = csv::StringRecord::new();
        for _ in 0..chunk.rows {
            if !reader.read_record(&mut record).map_err(|e| csv_error(path, e))? {
                return Err(ChunkError::Csv {
                    path: path.clone(),
                    line: Some(chunk.position.line()),
                    message: "source file shrank since the chunk was planned".into(),
                });
            }
            self.parse_record(path, &record, &mut table)?;
        }
        Ok(Chunk {
            file: chunk.file,
            first_row: chunk.first_row,
            table,
        })
    }
}

/// Iterator returned by [`Datastore::chunks`]. Holds at most one chunk.
pub struct ChunkIter<'a> {
    ds: &'a Datastore,
    file: usize,
    reader: Option<csv::Reader<File>>,
    row: u64,
}

impl Iterator for ChunkIter<'_> {
    type Item = Result<Chunk, ChunkError>;

    fn next(&mut self) -> Option<Self::Item> {
        let ds = self.ds;
        let mut record = csv::StringRecord::new();
        while self.file < ds.sources.len() {
            let path = &ds.sources[self.file];
            if self.reader.is_none() {
                match open_reader(path) {
                    Ok(r) => self.reader = Some(r),
                    Err(e) => {
                        self.file = ds.sources.len();
                        return Some(Err(e));
                    }
                }
                self.row = 0;
            }
            let reader = self.reader.as_mut().expect("reader opened");
            let mut table = DataTable::with_schema(&ds.schema);
            let first_row = self.row;
            while table.num_rows() < ds.chunk_size {
                match reader.read_record(&mut record) {
                    Ok(true) => {
                        if let Err(e) = ds.parse_record(path, &record, &mut table) {
                            self.file = ds.sources.len();
                            return Some(Err(e));
                        }
                        self.row += 1;
                    }
                    Ok(false) => break,
                    Err(e) => {
                        self.file = ds.sources.len();
                        return Some(Err(csv_error(path, e)));
                    }
                }
            }
            if table.num_rows() > 0 {
                return Some(Ok(Chunk {
                    file: self.file,
                    first_row,
                    table,
                }));
            }
            self.reader = None;
            self.file += 1;
        }
        None
    }
}
