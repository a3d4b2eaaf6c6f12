//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod props;

/// Γ(x) for positive integers and half-integers by the recurrence
/// Γ(x) = (x − 1)Γ(x − 1) down to Γ(1) = 1 or Γ(1/2) = √π.
pub fn gamma_half_integer(x: f64) -> f64 {
    assert!(x > 0.0 && (2.0 * x).fract() == 0.0, "{x} is not a half-integer");
    let mut g = if x.fract() == 0.0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut k = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while k < x {
        g *= k;
        k += 1.0;
    }
    g
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// I_x(a, b) for half-integer a, b by direct quadrature of the beta
/// integrand. Substituting t = u² removes the t^(a−1) endpoint behaviour;
/// for x > 1/2 the complement is integrated instead.
pub fn incomplete_beta_quadrature(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > 0.5 {
        return 1.0 - incomplete_beta_quadrature(1.0 - x, b, a);
    }
    let beta = gamma_half_integer(a) * gamma_half_integer(b) / gamma_half_integer(a + b);
    let integrand = |u: f64| 2.0 * u.powf(2.0 * a - 1.0) * (1.0 - u * u).powf(b - 1.0);
    integrate(&integrand, 0.0, x.sqrt(), 1e-15) / beta
}

/// Upper tail of F(df1, df2) at f by quadrature.
pub fn f_upper_tail_quadrature(f: f64, df1: u32, df2: u32) -> f64 {
    let x = df2 as f64 / (df2 as f64 + df1 as f64 * f);
    incomplete_beta_quadrature(x, df2 as f64 / 2.0, df1 as f64 / 2.0)
}

/// Simple-regression slope and intercept from the textbook sums.
pub fn simple_regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}
