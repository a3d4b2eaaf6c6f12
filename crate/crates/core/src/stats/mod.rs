//! Least-squares regression, fit summaries and ANOVA.
//!
//! Fits always include an intercept. Binary predictors recorded as text
//! (`yes`/`no` and similar) go through [`encode_binary`] first.

mod ols;
mod reference;
mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::{Column, ColumnData, DataTable, Value};

pub use ols::{
    anova, factor_lines, fit_ols, summarize, AnovaRow, AnovaTable, FactorLine, RegressionFit, RegressionSummary,
    SumsOfSquares, RANK_TOLERANCE,
};
pub use reference::{PrintedAnova, PrintedSummary, ReferenceTables};
pub use special::{f_pvalue, ln_gamma, regularized_incomplete_beta};

/// Tokens read as "present" (encoded 1) by default, compared case-insensitively.
pub const DEFAULT_PRESENCE_TOKENS: [&str; 5] = ["yes", "y", "true", "present", "1"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("column {column:?} is not binary: {reason}")]
    NonBinaryColumn { column: String, reason: String },
    #[error("design matrix is rank deficient; column {column:?} is collinear with earlier columns")]
    RankDeficient { column: String },
    #[error("{observations} observations are too few for {predictors} predictors plus an intercept")]
    InsufficientObservations { observations: usize, predictors: usize },
    #[error("column {0:?} has missing or non-numeric values")]
    MissingValue(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Response and ordered predictors of a linear model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub response: String,
    pub predictors: Vec<String>,
}

impl ModelSpec {
    pub fn new(response: impl Into<String>, predictors: &[&str]) -> Result<Self, StatsError> {
        let spec = ModelSpec {
            response: response.into(),
            predictors: predictors.iter().map(|p| p.to_string()).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Built-in warehouse models 1 to 3.
    pub fn preset(model: u8) -> Option<Self> {
        let predictors: &[&str] = match model {
            1 => &["MS", "RE", "UP", "TS", "SS", "DT"],
            2 => &["OIS", "PIS", "TIS"],
            3 => &["DQ", "SQ"],
            _ => return None,
        };
        Some(ModelSpec::new("DW", predictors).expect("presets are valid"))
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.predictors.is_empty() {
            return Err(StatsError::InvalidModel("no predictors".into()));
        }
        for (i, p) in self.predictors.iter().enumerate() {
            if self.predictors[..i].contains(p) {
                return Err(StatsError::InvalidModel(format!("predictor {p:?} listed twice")));
            }
        }
        if self.predictors.contains(&self.response) {
            return Err(StatsError::InvalidModel(format!(
                "response {:?} is also a predictor",
                self.response
            )));
        }
        Ok(())
    }

    /// Pulls the predictor columns and response out of `table` as floats.
    pub fn extract(&self, table: &DataTable) -> Result<(Vec<(String, Vec<f64>)>, Vec<f64>), StatsError> {
        self.validate()?;
        let numeric = |name: &str| -> Result<Vec<f64>, StatsError> {
            let col = table
                .column(name)
                .ok_or_else(|| StatsError::UnknownColumn(name.to_string()))?;
            col.to_f64().ok_or_else(|| StatsError::MissingValue(name.to_string()))
        };
        let mut predictors = Vec::with_capacity(self.predictors.len());
        for p in &self.predictors {
            predictors.push((p.clone(), numeric(p)?));
        }
        Ok((predictors, numeric(&self.response)?))
    }

    pub fn fit(&self, table: &DataTable) -> Result<RegressionFit, StatsError> {
        let (x, y) = self.extract(table)?;
        fit_ols(&self.response, &x, &y)
    }
}

/// Rewrites the listed columns as 0/1 integers.
///
/// Text columns may hold at most two distinct non-missing tokens, exactly
/// one of which must appear in `presence` (case-insensitive). Numeric
/// columns must already hold only 0 and 1. Missing cells stay missing.
pub fn encode_binary(table: &DataTable, columns: &[&str], presence: &[&str]) -> Result<DataTable, StatsError> {
    let mut out = table.clone();
    for &name in columns {
        let index = table
            .column_index(name)
            .ok_or_else(|| StatsError::UnknownColumn(name.to_string()))?;
        let col = &table.columns()[index];
        let non_binary = |reason: String| StatsError::NonBinaryColumn {
            column: name.to_string(),
            reason,
        };
        let mut values = Vec::with_capacity(col.len());
        match &col.data {
            ColumnData::Text(tokens) => {
                let mut distinct: Vec<&str> = Vec::new();
                for (row, token) in tokens.iter().enumerate() {
                    if !col.is_missing(row) && !distinct.contains(&token.as_str()) {
                        distinct.push(token);
                    }
                }
                if distinct.len() > 2 {
                    return Err(non_binary(format!("{} distinct tokens {distinct:?}", distinct.len())));
                }
                let is_present = |t: &str| presence.iter().any(|p| p.eq_ignore_ascii_case(t));
                if distinct.len() == 2 && is_present(distinct[0]) == is_present(distinct[1]) {
                    return Err(non_binary(format!(
                        "cannot tell which of {distinct:?} marks presence"
                    )));
                }
                for (row, token) in tokens.iter().enumerate() {
                    values.push(if col.is_missing(row) {
                        Value::Missing
                    } else {
                        Value::Integer(is_present(token) as i64)
                    });
                }
            }
            ColumnData::Integer(_) | ColumnData::Real(_) => {
                for row in 0..col.len() {
                    if col.is_missing(row) {
                        values.push(Value::Missing);
                        continue;
                    }
                    let v = col.f64_at(row);
                    if v != 0.0 && v != 1.0 {
                        return Err(non_binary(format!("value {v} at row {row} is neither 0 nor 1")));
                    }
                    values.push(Value::Integer(v as i64));
                }
            }
        }
        let mut encoded = Column::new(name, crate::chunk::ColumnType::Integer);
        for v in values {
            encoded.push(v);
        }
        out.replace_column(index, encoded);
    }
    Ok(out)
}
