//! The separation of two landmarks under landmark Brownian motion solves
//! `dr = σ(r) dB + b(r) dt` with
//!
//! ```text
//! σ(r) = sqrt(2 (K(0) - K(r)))
//! b(r) = ((d - 1) K(r) - K(0)) K'(r) / (K(0) + K(r))
//! ```
//!
//! Whether `r` reaches 0 with positive probability follows from the
//! Cherny–Engelbert integral tests with scale density
//! `ρ(r) = exp(∫_r^a 2b/σ²)` and `s(r) = ∫_0^r ρ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::completeness::{improper_integral, IntegralStatus, IntegralVerdict, QuadOpts, Signal};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::{integrate, integrate_log, Tolerance};
use crate::scalar::{logspace, Real};

/// A one-dimensional diffusion on `r > 0`.
pub trait RadialSde<T>: Sync {
    fn sigma(&self, r: T) -> T;
    fn drift(&self, r: T) -> T;
}

/// Coefficients of the separation process for `kernel` in `R^d`.
#[derive(Debug, Clone, Copy)]
pub struct SdeCoeffs<'a, T: Real> {
    kernel: &'a Kernel<T>,
    d: usize,
}

pub fn sde_coeffs<T: Real>(kernel: &Kernel<T>, d: usize) -> Result<SdeCoeffs<'_, T>> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(SdeCoeffs { kernel, d })
}

impl<T: Real> SdeCoeffs<'_, T> {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kernel(&self) -> &Kernel<T> {
        self.kernel
    }

    /// `σ² = 2 (K(0) - K(r))`.
    pub fn sigma_sq(&self, r: T) -> T {
        T::lit(2.0) * self.kernel.gap(r)
    }
}

impl<T: Real> RadialSde<T> for SdeCoeffs<'_, T> {
    fn sigma(&self, r: T) -> T {
        self.sigma_sq(r).sqrt()
    }

    /// Defined for `r > 0`.
    fn drift(&self, r: T) -> T {
        let k = self.kernel.eval(r);
        let k0 = self.kernel.k0();
        (T::from_count(self.d - 1) * k - k0) * self.kernel.deriv(r) / (k0 + k)
    }
}

fn check_radii<T: Real>(a: T, r: T) -> Result<()> {
    if !(a > T::zero()) || !(r > T::zero() && r <= a) {
        return Err(Error::InvalidArgument(format!("need 0 < r <= a, got r = {r}, a = {a}")));
    }
    Ok(())
}

/// Closed-form scale density
/// `ρ(r) = (gap(a)/gap(r))^{1-d/2} ((K(0)+K(a))/(K(0)+K(r)))^{-d/2}`.
pub fn rho<T: Real>(kernel: &Kernel<T>, d: usize, a: T, r: T) -> Result<T> {
    check_radii(a, r)?;
    let k0 = kernel.k0();
    let half_d = T::from_count(d) / T::lit(2.0);
    let sum_term = -half_d * ((k0 + kernel.eval(a)) / (k0 + kernel.eval(r))).ln();
    let gap_term = if d == 2 {
        T::zero()
    } else {
        (T::one() - half_d) * (kernel.gap(a).ln() - kernel.gap(r).ln())
    };
    Ok((gap_term + sum_term).exp())
}

/// `ρ(r) = exp(∫_r^a 2b(y)/σ(y)² dy)` by direct quadrature.
pub fn rho_by_quadrature<T: Real>(kernel: &Kernel<T>, d: usize, a: T, r: T) -> Result<T> {
    check_radii(a, r)?;
    let c = sde_coeffs(kernel, d)?;
    let tol = Tolerance { abs_tol: T::lit(1e-13), ..Tolerance::default() };
    let exponent = integrate_log(|y| T::lit(2.0) * c.drift(y) / c.sigma_sq(y), r, a, &tol)?;
    Ok(exponent.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CeConclusion {
    HitsZeroPositiveProb,
    ConditionsNotMet,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    Yes,
    No,
    Unknown,
}

/// Conclusion from the three verdicts: zero is hit with positive probability
/// iff `∫ρ` converges, `∫(1+|b|)/(ρσ²)` diverges and `∫(1+|b|)s/(ρσ²)`
/// converges. An inconclusive verdict makes the conclusion inconclusive
/// unless another verdict already violates its condition.
pub fn ce_conclusion<T>(i_rho: &IntegralStatus<T>, i_speed: &IntegralStatus<T>, i_speed_s: &IntegralStatus<T>) -> CeConclusion {
    let convergent = |s: &IntegralStatus<T>| match s {
        IntegralStatus::Convergent(_) => Truth::Yes,
        IntegralStatus::Divergent => Truth::No,
        IntegralStatus::Inconclusive => Truth::Unknown,
    };
    let divergent = |s: &IntegralStatus<T>| match convergent(s) {
        Truth::Yes => Truth::No,
        Truth::No => Truth::Yes,
        Truth::Unknown => Truth::Unknown,
    };
    let parts = [convergent(i_rho), divergent(i_speed), convergent(i_speed_s)];
    if parts.contains(&Truth::No) {
        CeConclusion::ConditionsNotMet
    } else if parts.contains(&Truth::Unknown) {
        CeConclusion::Inconclusive
    } else {
        CeConclusion::HitsZeroPositiveProb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeReport<T> {
    pub d: usize,
    pub a: T,
    /// `∫_0^a ρ`.
    pub i_rho: IntegralVerdict<T>,
    /// `∫_0^a (1 + |b|) / (ρ σ²)`.
    pub i_speed: IntegralVerdict<T>,
    /// `∫_0^a (1 + |b|) s / (ρ σ²)`.
    pub i_speed_s: IntegralVerdict<T>,
    pub conclusion: CeConclusion,
    /// Set when `d != 2`.
    pub heuristic: bool,
}

/// `s(r) = ∫_0^r ρ`, tabulated on a log grid and interpolated by cubic
/// Hermite in `(ln r, ln s)` with the exact slope `r ρ(r) / s(r)`.
struct ScaleFunction<T> {
    ln_r: Vec<T>,
    ln_s: Vec<T>,
    slope: Vec<T>,
    /// Power-law exponent of `s` below the grid.
    head: T,
}

impl<T: Real> ScaleFunction<T> {
    fn new<F: Fn(T) -> T>(rho: F, a: T, decades: usize) -> Result<Self> {
        let per_decade = 16;
        let lo = a * T::lit(10.0).powi(-(decades as i32));
        let grid = logspace(lo, a, decades * per_decade + 1);
        // ρ ≈ C r^α below the grid, so ∫_0^lo ρ = lo ρ(lo) / (α + 1)
        let alpha = (rho(grid[1]).ln() - rho(grid[0]).ln()) / (grid[1].ln() - grid[0].ln());
        if !(alpha > -T::one()) {
            return Err(Error::InvalidArgument("scale density is not integrable at the origin".into()));
        }
        let tol = Tolerance { abs_tol: T::zero(), rel_tol: T::lit(1e-12).max(T::epsilon() * T::lit(100.0)), max_intervals: 200 };
        let mut s = lo * rho(lo) / (alpha + T::one());
        let mut ln_r = Vec::with_capacity(grid.len());
        let mut ln_s = Vec::with_capacity(grid.len());
        let mut slope = Vec::with_capacity(grid.len());
        for (k, &r) in grid.iter().enumerate() {
            if k > 0 {
                s = s + integrate(&rho, grid[k - 1], r, &tol)?;
            }
            ln_r.push(r.ln());
            ln_s.push(s.ln());
            slope.push(r * rho(r) / s);
        }
        Ok(ScaleFunction { ln_r, ln_s, slope, head: alpha + T::one() })
    }

    fn eval(&self, r: T) -> T {
        let x = r.ln();
        let n = self.ln_r.len();
        if x <= self.ln_r[0] {
            return (self.ln_s[0] + self.head * (x - self.ln_r[0])).exp();
        }
        let k = self.ln_r.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let h = self.ln_r[k + 1] - self.ln_r[k];
        let t = (x - self.ln_r[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        (h00 * self.ln_s[k] + h10 * h * self.slope[k] + h01 * self.ln_s[k + 1] + h11 * h * self.slope[k + 1]).exp()
    }
}

/// Runs the three Cherny–Engelbert integral tests on `(0, a]`.
pub fn ce_classify<T: Real>(kernel: &Kernel<T>, d: usize, a: T) -> Result<CeReport<T>> {
    ce_classify_with(kernel, d, a, &QuadOpts::default())
}

pub fn ce_classify_with<T: Real>(kernel: &Kernel<T>, d: usize, a: T, opts: &QuadOpts<T>) -> Result<CeReport<T>> {
    let c = sde_coeffs(kernel, d)?;
    let rho_f = |r: T| rho(kernel, d, a, r).unwrap_or(T::nan());
    let speed = |r: T| (T::one() + c.drift(r).abs()) / (rho_f(r) * c.sigma_sq(r));
    let i_rho = improper_integral(rho_f, a, opts)?;
    let i_speed = improper_integral(speed, a, opts)?;
    let i_speed_s = if i_rho.status.is_convergent() {
        // one decade below the smallest cutoff covers every quadrature node
        let s = ScaleFunction::new(rho_f, a, opts.decades + 1)?;
        improper_integral(|r: T| speed(r) * s.eval(r), a, opts)?
    } else {
        IntegralVerdict {
            status: IntegralStatus::Divergent,
            evidence: Vec::new(),
            exponent_fit: None,
            tail_model: None,
            decided_by: Signal::InfiniteFactor,
        }
    };
    let conclusion = ce_conclusion(&i_rho.status, &i_speed.status, &i_speed_s.status);
    Ok(CeReport { d, a, i_rho, i_speed, i_speed_s, conclusion, heuristic: d != 2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOpts<T> {
    pub dt: T,
    pub horizon: T,
    pub n_paths: usize,
    pub seed: u64,
    /// Paths are absorbed once `r <= eps_hit`.
    pub eps_hit: T,
}

impl<T: Real> Default for SimOpts<T> {
    fn default() -> Self {
        SimOpts { dt: T::lit(1e-4), horizon: T::lit(5.0), n_paths: 10_000, seed: 42, eps_hit: T::lit(1e-4) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate<T> {
    pub n_paths: usize,
    pub n_hits: usize,
    pub horizon: T,
    pub r0: T,
    pub dt: T,
    pub eps_hit: T,
    pub p_hat: T,
    /// Wilson score interval at 95%.
    pub ci95: (T, T),
    pub seed: u64,
}

/// Wilson score interval for `hits` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    // the exact interval always contains p; clamp away rounding
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// 97.5% standard normal quantile.
pub const Z_95_TWO_SIDED: f64 = 1.959_963_984_540_054;
/// 99% standard normal quantile.
pub const Z_99_ONE_SIDED: f64 = 2.326_347_874_040_841;

/// Pooled two-proportion z statistic for `H1: p_a > p_b`.
pub fn two_proportion_z<T: Real>(a: &HittingEstimate<T>, b: &HittingEstimate<T>) -> f64 {
    let (na, nb) = (a.n_paths as f64, b.n_paths as f64);
    let (pa, pb) = (a.n_hits as f64 / na, b.n_hits as f64 / nb);
    let pooled = (a.n_hits + b.n_hits) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return if pa > pb { f64::INFINITY } else { 0.0 };
    }
    (pa - pb) / se
}

/// `true` when path `index` reaches `eps_hit` before the horizon.
fn path_hits<T: Real, S: RadialSde<T> + ?Sized>(sde: &S, r0: T, steps: usize, opts: &SimOpts<T>, index: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let sqrt_dt = opts.dt.sqrt();
    let mut r = r0;
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        r = r + sde.drift(r) * opts.dt + sde.sigma(r) * sqrt_dt * T::lit(z);
        if !(r > opts.eps_hit) {
            return true;
        }
    }
    false
}

/// Euler–Maruyama estimate of `P(r` reaches `eps_hit` before the horizon`)`.
///
/// Path `k` draws its increments from the ChaCha stream `k` of `seed`, so the
/// estimate does not depend on how paths are scheduled across threads.
pub fn simulate_paths<T: Real, S: RadialSde<T> + ?Sized>(sde: &S, r0: T, opts: &SimOpts<T>) -> Result<HittingEstimate<T>> {
    if !(r0 > T::zero()) {
        return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
    }
    if !(opts.dt > T::zero()) || !(opts.horizon > T::zero()) || opts.dt > opts.horizon / T::lit(100.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < dt <= horizon/100, got dt = {}, horizon = {}",
            opts.dt, opts.horizon
        )));
    }
    if opts.n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    for r in [r0, opts.eps_hit.max(T::min_positive_value())] {
        if !(sde.sigma(r).is_finite() && sde.drift(r).is_finite()) {
            return Err(Error::NonFiniteIntegrand(r.as_f64()));
        }
    }
    let steps = (opts.horizon / opts.dt).ceil().to_usize().expect("finite step count");
    let n_hits = if r0 <= opts.eps_hit {
        opts.n_paths
    } else {
        (0..opts.n_paths).into_par_iter().filter(|&k| path_hits(sde, r0, steps, opts, k)).count()
    };
    let (lo, hi) = wilson_interval(n_hits, opts.n_paths, Z_95_TWO_SIDED);
    Ok(HittingEstimate {
        n_paths: opts.n_paths,
        n_hits,
        horizon: opts.horizon,
        r0,
        dt: opts.dt,
        eps_hit: opts.eps_hit,
        p_hat: T::from_count(n_hits) / T::from_count(opts.n_paths),
        ci95: (T::lit(lo), T::lit(hi)),
        seed: opts.seed,
    })
}
