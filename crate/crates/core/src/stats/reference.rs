use serde::{Deserialize, Serialize};

use super::ols::{AnovaTable, RegressionSummary};
use super::special::f_pvalue;

const BUNDLED: &str = include_str!("../../data/reference_tables.json");

/// Values are printed to about six significant digits.
const PRINT_TOLERANCE: f64 = 5e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrintedSummary {
    pub label: String,
    pub multiple_r: f64,
    pub r_square: f64,
    pub adjusted_r_square: f64,
    pub standard_error: f64,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrintedAnova {
    pub label: String,
    pub df_regression: usize,
    pub df_residual: usize,
    pub df_total: usize,
    pub ss_regression: f64,
    pub ss_residual: f64,
    pub ss_total: f64,
    pub ms_regression: f64,
    pub ms_residual: f64,
    pub f: f64,
    pub significance_f: f64,
}

/// Published summary and ANOVA tables used as comparison targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTables {
    pub summary: PrintedSummary,
    pub anova: PrintedAnova,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PRINT_TOLERANCE * b.abs().max(1.0)
}

impl ReferenceTables {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED).expect("bundled reference tables parse")
    }

    /// Places where the printed tables contradict themselves.
    pub fn internal_inconsistencies(&self) -> Vec<String> {
        let s = &self.summary;
        let a = &self.anova;
        let mut out = Vec::new();
        let ratio = a.ms_regression / a.ms_residual;
        if !close(a.f, ratio) {
            out.push(format!(
                "{} prints F = {} but MS_regression / MS_residual = {} / {} = {:.6}",
                a.label, a.f, a.ms_regression, a.ms_residual, ratio
            ));
        }
        let p = f_pvalue(a.f, a.df_regression as f64, a.df_residual as f64);
        if !close(a.significance_f, p) {
            out.push(format!(
                "{} prints Significance F = {} but the F({}, {}) upper tail at its printed F = {} is {:.7} (residual {:.2e})",
                a.label,
                a.significance_f,
                a.df_regression,
                a.df_residual,
                a.f,
                p,
                p - a.significance_f
            ));
        }
        if s.observations != a.df_total + 1 {
            out.push(format!(
                "{} prints Observations = {} but {} has total df {} (n = {})",
                s.label,
                s.observations,
                a.label,
                a.df_total,
                a.df_total + 1
            ));
        }
        let n = (a.df_total + 1) as f64;
        let k = a.df_regression as f64;
        let adjusted = 1.0 - (1.0 - s.r_square) * (n - 1.0) / (n - k - 1.0);
        if !close(s.adjusted_r_square, adjusted) {
            out.push(format!(
                "{} prints Adjusted R Square = {} but R Square {} with n = {} and p = {} gives {:.6}",
                s.label, s.adjusted_r_square, s.r_square, n, k, adjusted
            ));
        }
        out
    }

    /// Warnings for every computed value that differs from its printed
    /// counterpart beyond print precision.
    pub fn compare(&self, summary: &RegressionSummary, anova: &AnovaTable) -> Vec<String> {
        let s = &self.summary;
        let a = &self.anova;
        let mut out = Vec::new();
        let mut check = |label: &str, field: &str, printed: f64, computed: f64| {
            if !close(computed, printed) {
                out.push(format!("{label} prints {field} = {printed}; computed {computed:.7}"));
            }
        };
        check(&s.label, "Multiple R", s.multiple_r, summary.multiple_r);
        check(&s.label, "R Square", s.r_square, summary.r_square);
        check(&s.label, "Adjusted R Square", s.adjusted_r_square, summary.adjusted_r_square);
        check(&s.label, "Standard Error", s.standard_error, summary.standard_error);
        check(&s.label, "Observations", s.observations as f64, summary.observations as f64);
        check(&a.label, "SS Regression", a.ss_regression, anova.regression.ss);
        check(&a.label, "SS Residual", a.ss_residual, anova.residual.ss);
        check(&a.label, "SS Total", a.ss_total, anova.total.ss);
        check(&a.label, "MS Regression", a.ms_regression, anova.ms_regression());
        check(&a.label, "MS Residual", a.ms_residual, anova.ms_residual());
        if !close(anova.f, a.f) {
            out.push(format!(
                "{} prints F = {} and Significance F = {}; F computed from MS values is {:.6} with Significance F {:.7}",
                a.label, a.f, a.significance_f, anova.f, anova.significance_f
            ));
        } else {
            check(&a.label, "Significance F", a.significance_f, anova.significance_f);
        }
        out
    }
}
