//! Small dense linear-algebra helpers shared by the GP and sampling code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest relative jitter tried when a factorisation fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Cholesky factor together with the diagonal jitter that was needed.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    /// Absolute jitter added to the diagonal (0 when none was needed).
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    pub fn log_determinant(&self) -> f64 {
        2.0 * self.factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }
}

/// Factor a symmetric matrix, escalating the diagonal jitter by ×10 from
/// `1e-10·scale` to `1e-6·scale` until the factorisation succeeds.
pub fn robust_cholesky(matrix: &DMatrix<f64>, scale: f64) -> Result<JitteredCholesky> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Numerical(format!(
            "cannot factor a non-square {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if let Some(factor) = Cholesky::new(matrix.clone()) {
        if factor.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
            return Ok(JitteredCholesky { factor, jitter: 0.0 });
        }
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(m) {
            return Ok(JitteredCholesky { factor, jitter });
        }
        rel *= 10.0;
    }
    let min_eig = min_symmetric_eigenvalue(matrix);
    Err(Error::Numerical(format!(
        "matrix of size {} is not positive definite even with jitter {:e}; min eigenvalue {:e}, scale {:e}",
        matrix.nrows(),
        JITTER_MAX * scale,
        min_eig,
        scale
    )))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Pfaffian of a real skew-symmetric matrix (Parlett–Reid elimination with
/// pivoting). Returns 0 for odd sizes.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "pfaffian needs a square matrix");
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        // pivot: largest entry in column k below the diagonal
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].abs();
        for i in (k + 2)..n {
            if a[(i, k)].abs() > best {
                best = a[(i, k)].abs();
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if a[(k + 1, k)] == 0.0 {
            return 0.0;
        }
        pf *= a[(k, k + 1)];
        if k + 2 < n {
            let pivot = a[(k, k + 1)];
            let tau: Vec<f64> = ((k + 2)..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<f64> = ((k + 2)..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in ((k + 2)..n).enumerate() {
                for (jj, j) in ((k + 2)..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}
