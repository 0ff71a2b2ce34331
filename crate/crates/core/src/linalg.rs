//! Small dense solvers. Matrices are row-major slices.

use crate::scalar::Real;

/// Gaussian elimination with partial pivoting; `a` and `b` are overwritten.
pub(crate) fn solve_dense<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv * n + col] == T::zero() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] = a[row * n + k] - f * a[col * n + k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum::<T>();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub(crate) fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<T>();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > T::zero()) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub(crate) fn cholesky_inverse<T: Real>(l: &[T], n: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); n * n];
    let mut col = vec![T::zero(); n];
    for c in 0..n {
        // forward: L y = e_c
        for i in 0..n {
            let e = if i == c { T::one() } else { T::zero() };
            let s = (0..i).map(|k| l[i * n + k] * col[k]).sum::<T>();
            col[i] = (e - s) / l[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let s = (i + 1..n).map(|k| l[k * n + i] * inv[k * n + c]).sum::<T>();
            inv[i * n + c] = (col[i] - s) / l[i * n + i];
        }
    }
    inv
}
