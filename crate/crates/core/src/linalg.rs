//! Small dense linear algebra: symmetric eigendecomposition (cyclic Jacobi),
//! Householder QR least squares, and singular values by one-sided Jacobi.
//!
//! Matrices here are at most a few dozen columns wide, so clarity wins over
//! blocking or SIMD.

use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major values. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column {j} length mismatch");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotConverged {
    pub sweeps: usize,
    pub off_diagonal: f64,
}

/// Eigenpairs of a symmetric matrix, unsorted. Column `k` of the returned
/// matrix is the eigenvector for eigenvalue `k`.
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Converges when the off-diagonal Frobenius norm drops below `tol` times the
/// matrix norm; fails if that has not happened after the sweep cap.
pub fn symmetric_eigen(a: &Matrix, tol: f64) -> Result<SymmetricEigen, NotConverged> {
    assert_eq!(a.rows, a.cols, "eigendecomposition needs a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);

    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let current = off(&m);
        // Quadratic convergence: keep sweeping well past `tol` while rotations
        // still change something.
        if current <= 1e-15 * scale {
            break;
        }
        if sweeps == MAX_SWEEPS {
            if current <= tol * scale {
                break;
            }
            return Err(NotConverged {
                sweeps,
                off_diagonal: current / scale,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    continue;
                }
                rotated = true;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    Ok(SymmetricEigen {
        values: (0..n).map(|i| m[(i, i)]).collect(),
        vectors: v,
    })
}

/// Singular values of `a` (descending) by one-sided Jacobi rotations on its
/// columns. Accurate for small singular values, unlike the eigenvalues of
/// `AᵀA`.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (rows, cols) = (a.rows, a.cols);
    let mut u = a.clone();
    for _ in 0..MAX_SWEEPS {
        let mut converged = true;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if converged {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Householder QR of a tall matrix, kept in factored form for least squares.
pub struct Qr {
    /// Upper triangle holds R; below the diagonal the Householder vectors.
    qr: Matrix,
    betas: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        assert!(a.rows >= a.cols, "QR needs rows >= cols");
        let (rows, cols) = (a.rows, a.cols);
        let mut qr = a.clone();
        let mut betas = vec![0.0; cols];
        for k in 0..cols {
            let norm = (k..rows).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            // v = x - alpha e1
            let v0 = qr[(k, k)] - alpha;
            qr[(k, k)] = v0;
            let vnorm2 = (k..rows).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<f64>();
            let beta = 2.0 / vnorm2;
            for j in k + 1..cols {
                let dot: f64 = (k..rows).map(|i| qr[(i, k)] * qr[(i, j)]).sum();
                for i in k..rows {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= beta * dot * vik;
                }
            }
            // Store v scaled so its leading entry is 1; R's diagonal takes the slot.
            for i in k + 1..rows {
                qr[(i, k)] /= v0;
            }
            betas[k] = beta * v0 * v0;
            qr[(k, k)] = alpha;
        }
        Qr { qr, betas }
    }

    /// Diagonal of R.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.qr.cols).map(|k| self.qr[(k, k)]).collect()
    }

    /// Upper-triangular factor R (cols × cols).
    pub fn r(&self) -> Matrix {
        let n = self.qr.cols;
        let mut r = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = self.qr[(i, j)];
            }
        }
        r
    }

    /// Applies Qᵀ to `y` in place.
    fn apply_qt(&self, y: &mut [f64]) {
        let (rows, cols) = (self.qr.rows, self.qr.cols);
        for k in 0..cols {
            if self.betas[k] == 0.0 {
                continue;
            }
            // Householder vector is (1, qr[k+1.., k]).
            let mut dot = y[k];
            for i in k + 1..rows {
                dot += self.qr[(i, k)] * y[i];
            }
            let f = self.betas[k] * dot;
            y[k] -= f;
            for i in k + 1..rows {
                y[i] -= f * self.qr[(i, k)];
            }
        }
    }

    /// Least-squares solution of `A x ≈ y`. Assumes R is nonsingular.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let cols = self.qr.cols;
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut x = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut s = qty[i];
            for j in i + 1..cols {
                s -= self.qr[(i, j)] * x[j];
            }
            x[i] = s / self.qr[(i, i)];
        }
        x
    }
}
