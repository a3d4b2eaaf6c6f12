use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Real,
    Text,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Field {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Field { name: name.into(), ty }
    }
}

/// A single parsed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Missing,
    Integer(i64),
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Missing cells hold 0; read them through [`Column::f64_at`] to get NaN.
    Integer(Vec<i64>),
    /// Missing cells hold NaN.
    Real(Vec<f64>),
    /// Missing cells hold the empty string.
    Text(Vec<String>),
}

impl ColumnData {
    fn empty(ty: ColumnType) -> Self {
        match ty {
            ColumnType::Integer => ColumnData::Integer(Vec::new()),
            ColumnType::Real => ColumnData::Real(Vec::new()),
            ColumnType::Text => ColumnData::Text(Vec::new()),
        }
    }

    pub fn ty(&self) -> ColumnType {
        match self {
            ColumnData::Integer(_) => ColumnType::Integer,
            ColumnData::Real(_) => ColumnType::Real,
            ColumnData::Text(_) => ColumnType::Text,
        }
    }

    fn len(&self) -> usize {
        match self {
            ColumnData::Integer(v) => v.len(),
            ColumnData::Real(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
    pub missing: Vec<bool>,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::empty(ty),
            missing: Vec::new(),
        }
    }

    pub fn from_integers(name: impl Into<String>, values: Vec<i64>) -> Self {
        let missing = vec![false; values.len()];
        Column {
            name: name.into(),
            data: ColumnData::Integer(values),
            missing,
        }
    }

    /// NaN entries are flagged missing.
    pub fn from_reals(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Column {
            name: name.into(),
            data: ColumnData::Real(values),
            missing,
        }
    }

    pub fn from_texts(name: impl Into<String>, values: Vec<String>) -> Self {
        let missing = vec![false; values.len()];
        Column {
            name: name.into(),
            data: ColumnData::Text(values),
            missing,
        }
    }

    pub fn ty(&self) -> ColumnType {
        self.data.ty()
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// Numeric view of a cell: NaN when missing or when the column is text.
    pub fn f64_at(&self, row: usize) -> f64 {
        if self.missing[row] {
            return f64::NAN;
        }
        match &self.data {
            ColumnData::Integer(v) => v[row] as f64,
            ColumnData::Real(v) => v[row],
            ColumnData::Text(_) => f64::NAN,
        }
    }

    /// Numeric view of the whole column, or `None` for text columns.
    pub fn to_f64(&self) -> Option<Vec<f64>> {
        if self.ty() == ColumnType::Text {
            return None;
        }
        Some((0..self.len()).map(|i| self.f64_at(i)).collect())
    }

    pub fn value(&self, row: usize) -> Value {
        if self.missing[row] {
            return Value::Missing;
        }
        match &self.data {
            ColumnData::Integer(v) => Value::Integer(v[row]),
            ColumnData::Real(v) => Value::Real(v[row]),
            ColumnData::Text(v) => Value::Text(v[row].clone()),
        }
    }

    /// Appends a value; panics if it does not match the column type.
    pub fn push(&mut self, value: Value) {
        match (&mut self.data, value) {
            (ColumnData::Integer(v), Value::Missing) => {
                v.push(0);
                self.missing.push(true);
            }
            (ColumnData::Real(v), Value::Missing) => {
                v.push(f64::NAN);
                self.missing.push(true);
            }
            (ColumnData::Text(v), Value::Missing) => {
                v.push(String::new());
                self.missing.push(true);
            }
            (ColumnData::Integer(v), Value::Integer(x)) => {
                v.push(x);
                self.missing.push(false);
            }
            (ColumnData::Real(v), Value::Real(x)) => {
                v.push(x);
                self.missing.push(false);
            }
            (ColumnData::Text(v), Value::Text(x)) => {
                v.push(x);
                self.missing.push(false);
            }
            (data, value) => panic!("cannot store {value:?} in a {} column", data.ty()),
        }
    }

    fn render(&self, row: usize, missing_token: &str) -> String {
        if self.missing[row] {
            return missing_token.to_string();
        }
        match &self.data {
            ColumnData::Integer(v) => v[row].to_string(),
            // Display for f64 is the shortest round-trip representation.
            ColumnData::Real(v) => v[row].to_string(),
            ColumnData::Text(v) => v[row].clone(),
        }
    }
}

/// Named, typed columns of equal length with a per-cell missing mask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    columns: Vec<Column>,
}

impl DataTable {
    pub fn with_schema(schema: &[Field]) -> Self {
        DataTable {
            columns: schema.iter().map(|f| Column::new(f.name.clone(), f.ty)).collect(),
        }
    }

    pub fn from_columns(columns: Vec<Column>) -> Self {
        if let Some(first) = columns.first() {
            let n = first.len();
            for c in &columns {
                assert_eq!(c.len(), n, "column {} length mismatch", c.name);
                assert_eq!(c.data.len(), n, "column {} data/mask mismatch", c.name);
            }
        }
        DataTable { columns }
    }

    pub fn schema(&self) -> Vec<Field> {
        self.columns.iter().map(|c| Field::new(c.name.clone(), c.ty())).collect()
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn replace_column(&mut self, index: usize, column: Column) {
        assert_eq!(column.len(), self.num_rows(), "replacement column length mismatch");
        self.columns[index] = column;
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        for (col, v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    /// Appends all rows of `other`, which must share this table's schema.
    pub fn append(&mut self, other: &DataTable) {
        assert_eq!(self.schema(), other.schema(), "schema mismatch on append");
        for i in 0..other.num_rows() {
            self.push_row(other.row(i));
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> DataTable {
        let mut out = DataTable::with_schema(&self.schema());
        for i in 0..n.min(self.num_rows()) {
            out.push_row(self.row(i));
        }
        out
    }

    /// Writes the table as comma-delimited text with a header row, rendering
    /// missing cells as `missing_token`.
    pub fn write_csv<W: Write>(&self, out: W, missing_token: &str) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.num_rows() {
            w.write_record(self.columns.iter().map(|c| c.render(i, missing_token)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows as JSON objects; missing and non-finite numbers become `null`.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = (0..self.num_rows())
            .map(|i| {
                let obj = self
                    .columns
                    .iter()
                    .map(|c| {
                        let v = match c.value(i) {
                            Value::Missing => serde_json::Value::Null,
                            Value::Integer(x) => x.into(),
                            Value::Real(x) => serde_json::Number::from_f64(x)
                                .map_or(serde_json::Value::Null, serde_json::Value::Number),
                            Value::Text(s) => s.into(),
                        };
                        (c.name.clone(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}
