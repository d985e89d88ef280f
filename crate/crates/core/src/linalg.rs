//! Small dense complex helpers shared by the pencil solver and the density
//! estimators.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;

/// Maximum absolute column sum.
pub(crate) fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number and the inverse, computed from an LU
/// factorisation. A zero pivot gives `(0, None)`.
pub(crate) fn rcond_and_inverse(m: &DMatrix<Complex64>) -> (f64, Option<DMatrix<Complex64>>) {
    let anorm = norm1(m);
    if anorm == 0.0 || !anorm.is_finite() {
        return (0.0, None);
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => {
            let inorm = norm1(&inv);
            if !inorm.is_finite() || inorm == 0.0 {
                (0.0, None)
            } else {
                (1.0 / (anorm * inorm), Some(inv))
            }
        }
        None => (0.0, None),
    }
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub(crate) fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::EigenFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// `log |det A|` for a row-major `n × n` matrix, overwriting `a` with its LU
/// factors. Returns `-∞` when a pivot is exactly zero.
///
/// Pivots are chosen by `|re| + |im|` and their moduli accumulated as
/// logarithms, so the result stays finite where the determinant itself would
/// overflow or underflow.
pub(crate) fn log_abs_det_in_place(a: &mut [Complex64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut log_det = 0.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].l1_norm();
        for i in (k + 1)..n {
            let v = a[i * n + k].l1_norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return f64::NEG_INFINITY;
        }
        if piv != k {
            for j in k..n {
                a.swap(k * n + j, piv * n + j);
            }
        }
        let pivot = a[k * n + k];
        log_det += pivot.norm().ln();
        let inv = pivot.inv();
        for i in (k + 1)..n {
            let factor = a[i * n + k] * inv;
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let u = a[k * n + j];
                a[i * n + j] -= factor * u;
            }
        }
    }
    log_det
}
