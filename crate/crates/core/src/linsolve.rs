//! Dense Gaussian elimination with partial pivoting.
//!
//! The exact oracle solves small (|H| ≤ 10000) hitting-probability systems;
//! desk-scale exactness is the point, so no iterative machinery.

use crate::error::{Error, Result};

/// Solves `a x = b` in place. `a` is row-major n×n.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);

    for col in 0..n {
        // partial pivot: largest magnitude on or below the diagonal
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in col..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in col + 1..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// max_i |a x − b|_i
pub fn residual_inf(a: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let n = b.len();
    let mut worst: f64 = 0.0;
    for row in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[row * n + k] * x[k];
        }
        worst = worst.max((acc - b[row]).abs());
    }
    worst
}
