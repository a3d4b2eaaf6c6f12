//! Correlation-matrix PCA for warehouse schema design.
//!
//! The pipeline has four stages: correlate the candidate variables, extract
//! factors by eigendecomposition, accumulate explained variance, and keep the
//! smallest prefix of factors that reaches a variance threshold. Each input
//! variable is then assigned to the retained factor it loads on most
//! strongly, and every non-empty factor becomes a proposed dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{symmetric_eigen, Matrix};

/// Default cumulative-variance retention threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.8;
/// Variables whose strongest |loading| is below this are left unassigned.
pub const ASSIGNMENT_FLOOR: f64 = 0.3;

const EIGEN_TOL: f64 = 1e-10;
const NEGATIVE_EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcaError {
    #[error("need at least 2 observations and 1 variable, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("column {0:?} contains a missing or non-finite value")]
    NonFinite(String),
    #[error("matrix is not a valid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("eigen-solver did not converge after {sweeps} sweeps (relative off-diagonal {off_diagonal:e})")]
    NotConverged { sweeps: usize, off_diagonal: f64 },
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
}

/// Observations × variables, column-major by variable.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    rows: usize,
}

impl NumericMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, PcaError> {
        assert_eq!(names.len(), columns.len(), "one name per column");
        let rows = columns.first().map_or(0, Vec::len);
        if rows < 2 || columns.is_empty() {
            return Err(PcaError::TooSmall {
                rows,
                cols: columns.len(),
            });
        }
        for (name, col) in names.iter().zip(&columns) {
            assert_eq!(col.len(), rows, "column {name} length mismatch");
            if col.iter().any(|v| !v.is_finite()) {
                return Err(PcaError::NonFinite(name.clone()));
            }
        }
        Ok(NumericMatrix {
            names,
            columns,
            rows,
        })
    }

    /// Columns named `X1..Xn`.
    pub fn unnamed(columns: Vec<Vec<f64>>) -> Result<Self, PcaError> {
        let names = (1..=columns.len()).map(|i| format!("X{i}")).collect();
        Self::new(names, columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major n × n.
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and range.
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, PcaError> {
        let n = names.len();
        if values.len() != n * n {
            return Err(PcaError::InvalidCorrelation(format!(
                "{} values for {n} variables",
                values.len()
            )));
        }
        for i in 0..n {
            if (values[i * n + i] - 1.0).abs() > 1e-12 {
                return Err(PcaError::InvalidCorrelation(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(PcaError::InvalidCorrelation(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - values[j * n + i]).abs() > 1e-12 {
                    return Err(PcaError::InvalidCorrelation(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(CorrelationMatrix { names, values })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.dim();
        Matrix::from_row_major(n, n, self.values.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub names: Vec<String>,
    /// Factor variances, descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the unit loading vector of component `k`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub cumulative: Vec<f64>,
    /// Retained component indices; empty until selection runs.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub component: usize,
    pub dimension: String,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaProposal {
    pub threshold: f64,
    pub assignment_floor: f64,
    pub pca: PcaResult,
    pub factors: Vec<Factor>,
    pub unassigned: Vec<String>,
}

impl SchemaProposal {
    pub fn proposed_dimensions(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.dimension.as_str()).collect()
    }
}

fn mean_and_sd(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Pearson correlation of every column pair, using the n−1 convention.
pub fn correlation_matrix(data: &NumericMatrix) -> Result<CorrelationMatrix, PcaError> {
    let n = data.cols();
    let rows = data.rows() as f64;
    let mut standardized = Vec::with_capacity(n);
    for j in 0..n {
        let col = data.column(j);
        let (mean, sd) = mean_and_sd(col);
        // relative test so constant columns with rounding noise still fail
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sd == 0.0 || sd <= 1e-14 * scale {
            return Err(PcaError::ZeroVariance(data.names()[j].clone()));
        }
        standardized.push(col.iter().map(|v| (v - mean) / sd).collect::<Vec<_>>());
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let dot: f64 = standardized[i].iter().zip(&standardized[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (rows - 1.0)).clamp(-1.0, 1.0);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    CorrelationMatrix::new(data.names().to_vec(), values)
}

/// Full eigendecomposition of a correlation matrix, sorted by descending
/// eigenvalue. Each eigenvector's largest-magnitude entry is made positive.
pub fn extract_factors(corr: &CorrelationMatrix) -> Result<PcaResult, PcaError> {
    let n = corr.dim();
    let eig = symmetric_eigen(&corr.to_matrix(), EIGEN_TOL).map_err(|e| PcaError::NotConverged {
        sweeps: e.sweeps,
        off_diagonal: e.off_diagonal,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &k in &order {
        let mut value = eig.values[k];
        if value < 0.0 {
            if value < -NEGATIVE_EIGEN_TOL {
                return Err(PcaError::InvalidCorrelation(format!(
                    "negative eigenvalue {value:e}; matrix is not positive semidefinite"
                )));
            }
            value = 0.0;
        }
        let mut vector = eig.vectors.column(k);
        let pivot = vector
            .iter()
            .copied()
            .reduce(|best, v| if v.abs() > best.abs() { v } else { best })
            .unwrap_or(0.0);
        if pivot < 0.0 {
            vector.iter_mut().for_each(|v| *v = -*v);
        }
        eigenvalues.push(value);
        eigenvectors.push(vector);
    }
    let cumulative = cumulative_variance(&eigenvalues);
    Ok(PcaResult {
        names: corr.names.clone(),
        eigenvalues,
        eigenvectors,
        cumulative,
        selected: Vec::new(),
    })
}

/// Prefix sums of the eigenvalues over their total; the last entry is 1.
pub fn cumulative_variance(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = eigenvalues
        .iter()
        .map(|v| {
            acc += v.max(0.0);
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Smallest prefix of components whose cumulative variance reaches
/// `threshold`; always at least one component.
pub fn select_components(cumulative: &[f64], threshold: f64) -> Result<Vec<usize>, PcaError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(PcaError::InvalidThreshold(threshold));
    }
    let count = cumulative
        .iter()
        .position(|&c| c >= threshold)
        .map_or(cumulative.len(), |i| i + 1)
        .max(1)
        .min(cumulative.len());
    Ok((0..count).collect())
}

/// Groups variables by their strongest loading among the retained components.
pub fn assign_variables(pca: &PcaResult) -> (Vec<Factor>, Vec<String>) {
    let mut members: Vec<Vec<String>> = vec![Vec::new(); pca.selected.len()];
    let mut unassigned = Vec::new();
    for (var, name) in pca.names.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &comp) in pca.selected.iter().enumerate() {
            let loading = pca.eigenvectors[comp][var].abs();
            // strict comparison keeps ties on the lower component index
            if best.is_none_or(|(_, b)| loading > b) {
                best = Some((slot, loading));
            }
        }
        match best {
            Some((slot, loading)) if loading >= ASSIGNMENT_FLOOR => members[slot].push(name.clone()),
            _ => unassigned.push(name.clone()),
        }
    }
    let factors = pca
        .selected
        .iter()
        .zip(members)
        .filter(|(_, vars)| !vars.is_empty())
        .map(|(&component, variables)| Factor {
            component,
            dimension: format!("dim{}_{}", component + 1, variables[0]),
            variables,
        })
        .collect();
    (factors, unassigned)
}

/// Runs correlate → extract → cumulate → select, then assigns variables.
pub fn design_schema(data: &NumericMatrix, threshold: f64) -> Result<SchemaProposal, PcaError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(PcaError::InvalidThreshold(threshold));
    }
    let corr = correlation_matrix(data)?;
    let mut pca = extract_factors(&corr)?;
    pca.selected = select_components(&pca.cumulative, threshold)?;
    let (factors, unassigned) = assign_variables(&pca);
    Ok(SchemaProposal {
        threshold,
        assignment_floor: ASSIGNMENT_FLOOR,
        pca,
        factors,
        unassigned,
    })
}
