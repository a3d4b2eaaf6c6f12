mod common;

use common::props::{correlation_draws, reconstruction};
use dwstage::pca::{correlation_matrix, design_schema, extract_factors, CorrelationMatrix, NumericMatrix};
use proptest::prelude::*;

fn data_draws() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6).prop_flat_map(|p| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 12), p))
}

fn named(columns: Vec<Vec<f64>>) -> NumericMatrix {
    let names = (0..columns.len()).map(|i| format!("c{i}")).collect();
    NumericMatrix::new(names, columns).unwrap()
}

/// Factor memberships as sorted name sets, independent of column order.
fn memberships(data: &NumericMatrix) -> Vec<Vec<String>> {
    let proposal = design_schema(data, 0.8).unwrap();
    let mut groups: Vec<Vec<String>> = proposal
        .factors
        .iter()
        .map(|f| {
            let mut v = f.variables.clone();
            v.sort();
            v
        })
        .collect();
    groups.sort();
    groups
}

/// Skips draws where a membership decision sits on a near-tie.
fn well_separated(data: &NumericMatrix) -> bool {
    let p = design_schema(data, 0.8).unwrap();
    let ev = &p.pca.eigenvalues;
    let gaps = ev.windows(2).all(|w| w[0] - w[1] > 1e-6);
    let cut = p.pca.selected.len();
    let threshold_clear = p.pca.cumulative.iter().all(|c| (c - 0.8).abs() > 1e-6);
    let loadings_clear = (0..data.cols()).all(|var| {
        let mut l: Vec<f64> = (0..cut).map(|k| p.pca.eigenvectors[k][var].abs()).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        (l.len() < 2 || l[0] - l[1] > 1e-6) && (l[0] - 0.3).abs() > 1e-6
    });
    gaps && threshold_clear && loadings_clear
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn eigendecomposition_reconstructs(vectors in correlation_draws(10)) {
        reconstruction(&vectors)?;
    }

    #[test]
    fn two_by_two_matches_closed_form(r in -0.999f64..0.999) {
        let c = CorrelationMatrix::new(vec!["a".into(), "b".into()], vec![1.0, r, r, 1.0]).unwrap();
        let ev = extract_factors(&c).unwrap().eigenvalues;
        prop_assert!((ev[0] - (1.0 + r.abs())).abs() < 1e-10);
        prop_assert!((ev[1] - (1.0 - r.abs())).abs() < 1e-10);
    }

    #[test]
    fn equicorrelation_matches_closed_form(n in 2usize..=8, u in 0.0f64..1.0) {
        // r ranges over the positive-definite interval (-1/(n-1), 1)
        let lo = -1.0 / (n as f64 - 1.0);
        let r = lo + (1.0 - lo) * (0.001 + 0.998 * u);
        let values = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { r }).collect();
        let names = (0..n).map(|i| format!("v{i}")).collect();
        let ev = extract_factors(&CorrelationMatrix::new(names, values).unwrap()).unwrap().eigenvalues;
        let big = 1.0 + (n as f64 - 1.0) * r;
        let mut want = vec![1.0 - r; n - 1];
        want.push(big);
        want.sort_by(|a, b| b.total_cmp(a));
        for (got, w) in ev.iter().zip(&want) {
            prop_assert!((got - w).abs() < 1e-10, "{ev:?} vs {want:?}");
        }
    }

    #[test]
    fn positive_rescaling_is_invisible(columns in data_draws(), which in 0usize..6, scale in 0.01f64..100.0) {
        let base = named(columns.clone());
        prop_assume!(base.cols() > 0 && correlation_matrix(&base).is_ok());
        prop_assume!(well_separated(&base));
        let mut scaled_cols = columns;
        let j = which % scaled_cols.len();
        scaled_cols[j].iter_mut().for_each(|v| *v *= scale);
        let scaled = named(scaled_cols);
        let (a, b) = (correlation_matrix(&base).unwrap(), correlation_matrix(&scaled).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let (ea, eb) = (extract_factors(&a).unwrap(), extract_factors(&b).unwrap());
        for (x, y) in ea.eigenvalues.iter().zip(&eb.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        prop_assert_eq!(memberships(&base), memberships(&scaled));
    }

    #[test]
    fn permuting_columns_permutes_factors(columns in data_draws(), shift in 1usize..6) {
        let base = named(columns.clone());
        prop_assume!(correlation_matrix(&base).is_ok());
        prop_assume!(well_separated(&base));
        let p = columns.len();
        let order: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let names: Vec<String> = order.iter().map(|&i| format!("c{i}")).collect();
        let permuted = NumericMatrix::new(names, order.iter().map(|&i| columns[i].clone()).collect()).unwrap();
        prop_assert_eq!(memberships(&base), memberships(&permuted));
    }
}
