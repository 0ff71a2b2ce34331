//! The Riemannian metric on landmark space is the inverse of the cometric
//! `[K(|x_i - x_j|)] ⊗ I_d`. Curve lengths use the midpoint rule on sampled
//! curves; the lower bounds come from covectors whose cometric norm is
//! known in closed form:
//!
//! * `d|x_i - x_j|` has squared norm `2 (K(0) - K(r_ij))`,
//! * `d|x_i|` has squared norm `K(0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{cholesky, cholesky_inverse};
use crate::scalar::{dist, dot, norm, Real};

/// Landmarks closer than this make the Gram matrix numerically singular.
pub const MIN_SEPARATION: f64 = 1e-10;

/// Configurations `x(t_k)`, each stored row-major as `n` rows of length `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve<T> {
    n: usize,
    d: usize,
    pub times: Vec<T>,
    pub points: Vec<Vec<T>>,
}

impl<T: Real> SampledCurve<T> {
    pub fn new(n: usize, d: usize, times: Vec<T>, points: Vec<Vec<T>>) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::Shape(format!("need n >= 2 landmarks and d >= 1, got n={n}, d={d}")));
        }
        if times.len() != points.len() {
            return Err(Error::Shape(format!("{} times but {} configurations", times.len(), points.len())));
        }
        if times.is_empty() {
            return Err(Error::Shape("empty curve".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n * d) {
            return Err(Error::Shape(format!("configuration has {} coordinates, expected {}", p.len(), n * d)));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let last = points.len() - 1;
        for p in &points[1..last.max(1)] {
            if let Some((i, j)) = coincident_pair(p, n, d) {
                return Err(Error::Collided(i, j));
            }
        }
        Ok(SampledCurve { n, d, times, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn segments(&self) -> impl Iterator<Item = (&[T], &[T])> {
        self.points.windows(2).map(|w| (w[0].as_slice(), w[1].as_slice()))
    }
}

fn coincident_pair<T: Real>(x: &[T], n: usize, d: usize) -> Option<(usize, usize)> {
    for i in 0..n {
        for j in i + 1..n {
            if !(dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]) > T::zero()) {
                return Some((i, j));
            }
        }
    }
    None
}

/// The metric `G = [K(|x_i - x_j|)]^{-1} ⊗ I_d`, stored as the `n × n` factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMatrix<T> {
    pub n: usize,
    pub d: usize,
    /// `[K(|x_i - x_j|)]`, row-major.
    pub gram: Vec<T>,
    /// Its inverse, row-major.
    pub gram_inv: Vec<T>,
    /// 1-norm condition number of the Gram matrix.
    pub condition: T,
}

fn one_norm<T: Real>(a: &[T], n: usize) -> T {
    (0..n).map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<T>()).fold(T::zero(), T::max)
}

impl<T: Real> MetricMatrix<T> {
    /// The full `nd × nd` matrix `G`.
    pub fn dense(&self) -> Vec<T> {
        expand(&self.gram_inv, self.n, self.d)
    }

    /// The full `nd × nd` cometric `G^{-1}`.
    pub fn dense_inverse(&self) -> Vec<T> {
        expand(&self.gram, self.n, self.d)
    }

    /// `<v, G v>` for a tangent vector `v` stored like a configuration.
    pub fn norm_sq(&self, v: &[T]) -> T {
        block_quadratic(&self.gram_inv, v, self.n, self.d)
    }
}

fn expand<T: Real>(a: &[T], n: usize, d: usize) -> Vec<T> {
    let m = n * d;
    let mut out = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..d {
                out[(i * d + k) * m + j * d + k] = a[i * n + j];
            }
        }
    }
    out
}

/// `Σ_{i,j} a_ij <v_i, v_j>`.
fn block_quadratic<T: Real>(a: &[T], v: &[T], n: usize, d: usize) -> T {
    let mut s = T::zero();
    for i in 0..n {
        let vi = &v[i * d..(i + 1) * d];
        s = s + a[i * n + i] * dot(vi, vi);
        for j in i + 1..n {
            s = s + T::lit(2.0) * a[i * n + j] * dot(vi, &v[j * d..(j + 1) * d]);
        }
    }
    s
}

fn gram<T: Real>(x: &[T], n: usize, d: usize, kernel: &Kernel<T>) -> Vec<T> {
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        g[i * n + i] = kernel.k0();
        for j in i + 1..n {
            let k = kernel.eval(dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]));
            g[i * n + j] = k;
            g[j * n + i] = k;
        }
    }
    g
}

/// Inverts the Gram matrix of `x` by Cholesky factorization.
pub fn metric_matrix<T: Real>(x: &[T], n: usize, d: usize, kernel: &Kernel<T>) -> Result<MetricMatrix<T>> {
    if x.len() != n * d || n == 0 || d == 0 {
        return Err(Error::Shape(format!("configuration has {} coordinates, expected n*d = {}", x.len(), n * d)));
    }
    let floor = T::lit(MIN_SEPARATION);
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            if !(r >= floor) {
                return Err(Error::SingularGram(f64::INFINITY));
            }
        }
    }
    let g = gram(x, n, d, kernel);
    let l = cholesky(&g, n).ok_or(Error::SingularGram(f64::INFINITY))?;
    let mut inv = cholesky_inverse(&l, n);
    for i in 0..n {
        for j in i + 1..n {
            let s = (inv[i * n + j] + inv[j * n + i]) / T::lit(2.0);
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    let condition = one_norm(&g, n) * one_norm(&inv, n);
    if !condition.is_finite() {
        return Err(Error::SingularGram(condition.as_f64()));
    }
    Ok(MetricMatrix { n, d, gram: g, gram_inv: inv, condition })
}

/// `g^{-1}(ξ, ξ) = Σ_{i,j} K(|x_i - x_j|) <ξ_i, ξ_j>` for a covector `ξ`.
pub fn cometric_norm_sq<T: Real>(x: &[T], xi: &[T], n: usize, d: usize, kernel: &Kernel<T>) -> Result<T> {
    if x.len() != n * d || xi.len() != n * d {
        return Err(Error::Shape("configuration and covector must both have n*d entries".into()));
    }
    Ok(block_quadratic(&gram(x, n, d, kernel), xi, n, d))
}

/// The covector `d|x_i - x_j|` at `x`.
pub fn distance_covector<T: Real>(x: &[T], n: usize, d: usize, i: usize, j: usize) -> Result<Vec<T>> {
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("need distinct landmark indices below {n}, got {i}, {j}")));
    }
    let r = dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
    if !(r > T::zero()) {
        return Err(Error::Collided(i.min(j), i.max(j)));
    }
    let mut xi = vec![T::zero(); n * d];
    for k in 0..d {
        let e = (x[i * d + k] - x[j * d + k]) / r;
        xi[i * d + k] = e;
        xi[j * d + k] = -e;
    }
    Ok(xi)
}

fn midpoint<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(u, v)| (*u + *v) / T::lit(2.0)).collect()
}

/// Length of the piecewise-linear interpolant with the metric frozen at each
/// segment's midpoint: `Σ_k sqrt(<Δx_k, G(x_{k+1/2}) Δx_k>)`.
pub fn curve_length<T: Real>(c: &SampledCurve<T>, kernel: &Kernel<T>) -> Result<T> {
    if c.len() < 2 {
        return Err(Error::InvalidArgument("curve length needs at least two samples".into()));
    }
    let mut total = T::zero();
    for (a, b) in c.segments() {
        let delta: Vec<T> = b.iter().zip(a).map(|(u, v)| *u - *v).collect();
        if delta.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let g = metric_matrix(&midpoint(a, b), c.n, c.d, kernel)?;
        total = total + g.norm_sq(&delta).max(T::zero()).sqrt();
    }
    Ok(total)
}

fn check_index(n: usize, i: usize) -> Result<()> {
    if i >= n {
        return Err(Error::InvalidArgument(format!("landmark index {i} out of range for n = {n}")));
    }
    Ok(())
}

/// Lower bound on the length contributed by changes of `r_ij = |x_i - x_j|`:
/// `Σ_k |Δr_k| / sqrt(2 (K(0) - K(r_{k+1/2})))`, where `r_{k+1/2}` is the
/// separation at the segment midpoint.
///
/// Each term is at most the midpoint-rule length of its segment, since
/// `|Δr_k| <= |d r_ij(Δx_k)|` at the midpoint.
pub fn collision_bound<T: Real>(c: &SampledCurve<T>, i: usize, j: usize, kernel: &Kernel<T>) -> Result<T> {
    check_index(c.n, i)?;
    check_index(c.n, j)?;
    if i == j {
        return Err(Error::InvalidArgument("collision bound needs two distinct landmarks".into()));
    }
    let d = c.d;
    let sep = |x: &[T]| dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
    let mut total = T::zero();
    for (a, b) in c.segments() {
        let dr = (sep(b) - sep(a)).abs();
        if dr == T::zero() {
            continue;
        }
        let r_mid = sep(&midpoint(a, b));
        total = total + dr / (T::lit(2.0) * kernel.gap(r_mid)).sqrt();
    }
    Ok(total)
}

/// Total variation of `|x_i|` along the piecewise-linear interpolant,
/// divided by `sqrt(K(0))`. A segment whose closest point to the origin is
/// interior (in particular one passing through the origin) is split there.
pub fn escape_bound<T: Real>(c: &SampledCurve<T>, i: usize, kernel: &Kernel<T>) -> Result<T> {
    check_index(c.n, i)?;
    let d = c.d;
    let mut variation = T::zero();
    for (a, b) in c.segments() {
        let (xa, xb) = (&a[i * d..(i + 1) * d], &b[i * d..(i + 1) * d]);
        let delta: Vec<T> = xb.iter().zip(xa).map(|(u, v)| *u - *v).collect();
        let len_sq = dot(&delta, &delta);
        let (na, nb) = (norm(xa), norm(xb));
        if len_sq == T::zero() {
            continue;
        }
        let s = -dot(xa, &delta) / len_sq;
        if s > T::zero() && s < T::one() {
            let closest: Vec<T> = xa.iter().zip(&delta).map(|(u, v)| *u + s * *v).collect();
            let nc = norm(&closest);
            variation = variation + (na - nc) + (nb - nc);
        } else {
            variation = variation + (nb - na).abs();
        }
    }
    Ok(variation / kernel.k0().sqrt())
}
