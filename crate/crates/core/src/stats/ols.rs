use std::io::Write;

use serde::{Deserialize, Serialize};

use super::special::f_pvalue;
use super::StatsError;
use crate::linalg::{singular_values, Matrix, Qr};

/// Relative singular-value cutoff below which the design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub response: String,
    pub predictors: Vec<String>,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub observed: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Sums of squares and degrees of freedom of a fit with an intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumsOfSquares {
    pub regression: f64,
    pub residual: f64,
    pub total: f64,
    pub observations: usize,
    pub predictors: usize,
}

impl SumsOfSquares {
    /// From regression and residual sums alone; the total is their sum and
    /// the observation count follows from the degrees of freedom.
    pub fn from_table(ss_regression: f64, ss_residual: f64, df_regression: usize, df_residual: usize) -> Self {
        SumsOfSquares {
            regression: ss_regression,
            residual: ss_residual,
            total: ss_regression + ss_residual,
            observations: df_regression + df_residual + 1,
            predictors: df_regression,
        }
    }

    pub fn df_regression(&self) -> usize {
        self.predictors
    }

    pub fn df_residual(&self) -> usize {
        self.observations - self.predictors - 1
    }

    pub fn df_total(&self) -> usize {
        self.observations - 1
    }
}

/// Goodness-of-fit summary, serialized with spreadsheet-style labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    #[serde(rename = "Multiple R")]
    pub multiple_r: f64,
    #[serde(rename = "R Square")]
    pub r_square: f64,
    #[serde(rename = "Adjusted R Square")]
    pub adjusted_r_square: f64,
    #[serde(rename = "Standard Error")]
    pub standard_error: f64,
    #[serde(rename = "Observations")]
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub df: usize,
    #[serde(rename = "SS")]
    pub ss: f64,
    #[serde(rename = "MS", skip_serializing_if = "Option::is_none", default)]
    pub ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    #[serde(rename = "Regression")]
    pub regression: AnovaRow,
    #[serde(rename = "Residual")]
    pub residual: AnovaRow,
    #[serde(rename = "Total")]
    pub total: AnovaRow,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "Significance F")]
    pub significance_f: f64,
}

impl AnovaTable {
    pub fn ms_regression(&self) -> f64 {
        self.regression.ms.expect("regression row has MS")
    }

    pub fn ms_residual(&self) -> f64 {
        self.residual.ms.expect("residual row has MS")
    }
}

/// R² is SSR / SST; a response with no variance gets R² = 0.
pub fn summarize(sums: &SumsOfSquares) -> RegressionSummary {
    let n = sums.observations as f64;
    let p = sums.predictors as f64;
    let r_square = if sums.total > 0.0 {
        (sums.regression / sums.total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    RegressionSummary {
        multiple_r: r_square.sqrt(),
        r_square,
        adjusted_r_square: 1.0 - (1.0 - r_square) * (n - 1.0) / (n - p - 1.0),
        standard_error: (sums.residual / sums.df_residual() as f64).sqrt(),
        observations: sums.observations,
    }
}

pub fn anova(sums: &SumsOfSquares) -> AnovaTable {
    let df_reg = sums.df_regression();
    let df_res = sums.df_residual();
    let ms_reg = sums.regression / df_reg as f64;
    let ms_res = sums.residual / df_res as f64;
    let f = ms_reg / ms_res;
    AnovaTable {
        regression: AnovaRow {
            df: df_reg,
            ss: sums.regression,
            ms: Some(ms_reg),
        },
        residual: AnovaRow {
            df: df_res,
            ss: sums.residual,
            ms: Some(ms_res),
        },
        total: AnovaRow {
            df: sums.df_total(),
            ss: sums.total,
            ms: None,
        },
        f,
        significance_f: f_pvalue(f, df_reg as f64, df_res as f64),
    }
}

/// Least-squares fit of `y` on the given predictor columns plus an intercept,
/// solved by Householder QR.
pub fn fit_ols(response: &str, predictors: &[(String, Vec<f64>)], y: &[f64]) -> Result<RegressionFit, StatsError> {
    let n = y.len();
    let p = predictors.len();
    if p == 0 {
        return Err(StatsError::InvalidModel("at least one predictor is required".into()));
    }
    if n <= p + 1 {
        return Err(StatsError::InsufficientObservations {
            observations: n,
            predictors: p,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::MissingValue(response.to_string()));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(StatsError::InvalidModel(format!(
                "predictor {name:?} has {} values for {n} observations",
                col.len()
            )));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::MissingValue(name.clone()));
        }
    }

    let mut columns = Vec::with_capacity(p + 1);
    columns.push(vec![1.0; n]);
    columns.extend(predictors.iter().map(|(_, c)| c.clone()));
    let design = Matrix::from_columns(n, &columns);

    let sv = singular_values(&design);
    if sv[sv.len() - 1] < RANK_TOLERANCE * sv[0] {
        let qr = Qr::new(&design);
        // The first column nearly inside the span of earlier ones has the
        // smallest diagonal of R relative to its own norm.
        let worst = qr
            .r_diagonal()
            .iter()
            .zip(&columns)
            .map(|(r, c)| {
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    r.abs() / norm
                }
            })
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(i, _)| i);
        let column = if worst == 0 {
            "intercept".to_string()
        } else {
            predictors[worst - 1].0.clone()
        };
        return Err(StatsError::RankDeficient { column });
    }

    let coef = Qr::new(&design).solve(y);
    let fitted: Vec<f64> = (0..n)
        .map(|i| design.row(i).iter().zip(&coef).map(|(x, b)| x * b).sum())
        .collect();
    let residuals = y.iter().zip(&fitted).map(|(o, f)| o - f).collect();
    Ok(RegressionFit {
        response: response.to_string(),
        predictors: predictors.iter().map(|(name, _)| name.clone()).collect(),
        intercept: coef[0],
        slopes: coef[1..].to_vec(),
        observed: y.to_vec(),
        fitted,
        residuals,
    })
}

impl RegressionFit {
    pub fn sums(&self) -> SumsOfSquares {
        let n = self.observed.len();
        let mean = self.observed.iter().sum::<f64>() / n as f64;
        SumsOfSquares {
            regression: self.fitted.iter().map(|f| (f - mean) * (f - mean)).sum(),
            residual: self.residuals.iter().map(|e| e * e).sum(),
            total: self.observed.iter().map(|y| (y - mean) * (y - mean)).sum(),
            observations: n,
            predictors: self.predictors.len(),
        }
    }

    pub fn summary(&self) -> RegressionSummary {
        summarize(&self.sums())
    }

    pub fn anova(&self) -> AnovaTable {
        anova(&self.sums())
    }
}

/// One-predictor fit with its scatter data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLine {
    pub predictor: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_square: f64,
    /// 1-based rank by R², best fit first.
    pub rank: usize,
    /// (predictor value, response, fitted value)
    pub points: Vec<(f64, f64, f64)>,
}

impl FactorLine {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["predictor_value", "response", "fitted"])?;
        for (x, y, f) in &self.points {
            w.write_record([x.to_string(), y.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simple regression of the response on each predictor separately, ranked
/// by R² (ties keep input order). Rows with a missing x or y are skipped
/// per line. A constant predictor gets slope 0 and R² 0.
pub fn factor_lines(response: (&str, &[f64]), predictors: &[(String, Vec<f64>)]) -> Result<Vec<FactorLine>, StatsError> {
    let (response_name, y) = response;
    let mut lines = Vec::with_capacity(predictors.len());
    for (name, x) in predictors {
        if x.len() != y.len() {
            return Err(StatsError::InvalidModel(format!("predictor {name:?} length mismatch")));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = x
            .iter()
            .zip(y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (*a, *b))
            .unzip();
        let n = xs.len();
        if n < 3 {
            return Err(StatsError::InsufficientObservations {
                observations: n,
                predictors: 1,
            });
        }
        let mean_y = ys.iter().sum::<f64>() / n as f64;
        let constant = xs.iter().all(|v| *v == xs[0]);
        let (slope, intercept, fitted, r_square) = if constant {
            (0.0, mean_y, vec![mean_y; n], 0.0)
        } else {
            match fit_ols(response_name, &[(name.clone(), xs.clone())], &ys) {
                Ok(fit) => {
                    let r2 = fit.summary().r_square;
                    (fit.slopes[0], fit.intercept, fit.fitted, r2)
                }
                Err(StatsError::RankDeficient { .. }) => (0.0, mean_y, vec![mean_y; n], 0.0),
                Err(e) => return Err(e),
            }
        };
        lines.push(FactorLine {
            predictor: name.clone(),
            slope,
            intercept,
            r_square,
            rank: 0,
            points: xs.into_iter().zip(ys).zip(fitted).map(|((x, y), f)| (x, y, f)).collect(),
        });
    }
    lines.sort_by(|a, b| b.r_square.total_cmp(&a.r_square));
    for (i, line) in lines.iter_mut().enumerate() {
        line.rank = i + 1;
    }
    Ok(lines)
}
