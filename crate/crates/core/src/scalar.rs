//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Ordinary least squares of `y` on the given regressor columns (plus an intercept).
/// Returns `(coefficients, rms_residual)` with the intercept first.
pub(crate) fn least_squares<T: Real>(columns: &[Vec<T>], y: &[T]) -> Option<(Vec<T>, T)> {
    let m = y.len();
    let k = columns.len() + 1;
    if m < k {
        return None;
    }
    let row = |i: usize, j: usize| if j == 0 { T::one() } else { columns[j - 1][i] };
    // Center the regressors to keep the normal equations well conditioned.
    let mean = |j: usize| (0..m).map(|i| row(i, j)).sum::<T>() / T::from_count(m);
    let means: Vec<T> = (0..k).map(|j| if j == 0 { T::zero() } else { mean(j) }).collect();
    let y_mean = y.iter().copied().sum::<T>() / T::from_count(m);
    let kk = k - 1;
    let mut a = vec![T::zero(); kk * kk];
    let mut rhs = vec![T::zero(); kk];
    for i in 0..m {
        for p in 0..kk {
            let xp = row(i, p + 1) - means[p + 1];
            rhs[p] = rhs[p] + xp * (y[i] - y_mean);
            for q in 0..kk {
                a[p * kk + q] = a[p * kk + q] + xp * (row(i, q + 1) - means[q + 1]);
            }
        }
    }
    let slopes = crate::linalg::solve_dense(&mut a, &mut rhs, kk)?;
    let intercept = y_mean
        - slopes
            .iter()
            .enumerate()
            .map(|(p, &s)| s * means[p + 1])
            .sum::<T>();
    let mut coef = vec![intercept];
    coef.extend(slopes);
    let ss = (0..m)
        .map(|i| {
            let fit = (0..k).map(|j| coef[j] * row(i, j)).sum::<T>();
            (y[i] - fit) * (y[i] - fit)
        })
        .sum::<T>();
    Some((coef, (ss / T::from_count(m)).sqrt()))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * T::from_count(i) / T::from_count(n - 1)).exp())
        .collect()
}
