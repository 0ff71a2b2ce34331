//! Radial cometric kernels `K: [0, inf) -> R`.
//!
//! Every downstream computation (Hamiltonian flow, completeness criteria, the
//! radial diffusion, metric lengths) uses only the scalar profile `K(r)`; the
//! block cometric `K(|x_i - x_j|) I_d` is never materialized.
//!
//! Alongside `eval` each profile supplies an accurate `gap(r) = K(0) - K(r)`.
//! Near the origin the naive difference cancels catastrophically (for the
//! Gaussian, `1 - exp(-r^2)` is exactly zero in `f64` once `r < 1e-8`), and
//! every completeness criterion is a statement about the gap as `r -> 0`.

mod spec;
mod tabulated;

pub use spec::{KernelBlock, KernelSpec};

use crate::error::{Error, Result};
use crate::scalar::{logspace, Real};
use tabulated::Tabulated;

/// `value * exp(-rate * (r - at))`, used to continue a profile past a matching point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExpTail<T> {
    pub at: T,
    pub value: T,
    pub rate: T,
}

impl<T: Real> ExpTail<T> {
    /// Matches value and first derivative at `at`.
    fn matched(at: T, value: T, slope: T) -> Self {
        ExpTail { at, value, rate: -slope / value }
    }

    fn eval(&self, r: T) -> T {
        self.value * (-self.rate * (r - self.at)).exp()
    }

    fn deriv(&self, r: T) -> T {
        -self.rate * self.eval(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Profile<T> {
    Laplacian,
    C1Bessel,
    Gaussian,
    LogModified { c: T, tail: ExpTail<T> },
    PowerGap { d: T, gamma: T, switch: T, tail: ExpTail<T> },
    Tabulated(Tabulated<T>),
}

/// An immutable radial kernel profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    spec: KernelSpec,
    k0: T,
    profile: Profile<T>,
}

/// Right end of the window on which the log-modified formula is defined.
const LOG_MODIFIED_EDGE: f64 = 0.5;

fn log_modified_gap<T: Real>(r: T, c: T) -> T {
    r * r * (T::one() - r.ln()).powf(c)
}

fn log_modified_deriv<T: Real>(r: T, c: T) -> T {
    let l = T::one() - r.ln();
    -r * l.powf(c - T::one()) * (T::lit(2.0) * l - c)
}

/// `1 - (1 + r) e^{-r}` without cancellation near zero.
fn c1_half_gap<T: Real>(r: T) -> T {
    if r < T::lit(0.05) {
        // sum_{m>=2} (-1)^m (m-1) r^m / m!
        let mut term = r * r / T::lit(2.0); // r^m / m! at m = 2
        let mut sum = term;
        for m in 3..24 {
            term = -term * r / T::from_count(m);
            sum = sum + term * T::from_count(m - 1);
        }
        sum
    } else {
        T::one() - (T::one() + r) * (-r).exp()
    }
}

impl<T: Real> Kernel<T> {
    /// Builds the kernel and checks the structural invariants on the default grid.
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.check()?;
        let kernel = Self::build(spec, false)?;
        let report = kernel.validate(&default_grid())?;
        if let Some(v) = report.violations.first() {
            return Err(Error::KernelParameter(format!(
                "kernel `{}` fails validation: {:?} at r = {}",
                spec.variant_name(),
                v.kind,
                v.r
            )));
        }
        Ok(kernel)
    }

    /// Builds without range or invariant checks (tabulated data still needs `r = 0`).
    /// Intended for inspecting bad data with [`Kernel::validate`].
    pub fn new_unchecked(spec: &KernelSpec) -> Result<Self> {
        Self::build(spec, true)
    }

    fn build(spec: &KernelSpec, unchecked: bool) -> Result<Self> {
        let one = T::one();
        let (k0, profile) = match spec {
            KernelSpec::Laplacian => (one, Profile::Laplacian),
            KernelSpec::C1Bessel => (T::lit(2.0), Profile::C1Bessel),
            KernelSpec::Gaussian => (one, Profile::Gaussian),
            KernelSpec::LogModified { c } => {
                let c = T::lit(*c);
                let edge = T::lit(LOG_MODIFIED_EDGE);
                let value = one - log_modified_gap(edge, c);
                let tail = ExpTail::matched(edge, value, log_modified_deriv(edge, c));
                (one, Profile::LogModified { c, tail })
            }
            KernelSpec::PowerGap { d, gamma } => {
                let (d, gamma) = (T::lit(*d), T::lit(*gamma));
                // switch to the tail where the power law has consumed half of K(0)
                let switch = (T::lit(0.5) / d).powf(one / gamma);
                let slope = -d * gamma * switch.powf(gamma - one);
                let tail = ExpTail::matched(switch, T::lit(0.5), slope);
                (one, Profile::PowerGap { d, gamma, switch, tail })
            }
            KernelSpec::Tabulated { samples } => {
                let t = if unchecked {
                    Tabulated::new_unchecked(samples)?
                } else {
                    Tabulated::new(samples)?
                };
                (t.k0(), Profile::Tabulated(t))
            }
        };
        Ok(Kernel { spec: spec.clone(), k0, profile })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn name(&self) -> &'static str {
        self.spec.variant_name()
    }

    /// `K(0)`.
    pub fn k0(&self) -> T {
        self.k0
    }

    /// Whether `x -> K(|x|)` is C^1 at the origin, i.e. `K'(0+) = 0`.
    pub fn is_c1_at_origin(&self) -> bool {
        match &self.profile {
            Profile::Laplacian | Profile::Tabulated(_) => false,
            Profile::C1Bessel | Profile::Gaussian | Profile::LogModified { .. } => true,
            Profile::PowerGap { gamma, .. } => *gamma > T::one(),
        }
    }

    pub fn smoothness_note(&self) -> &'static str {
        match &self.profile {
            Profile::Laplacian => "C^0 at 0",
            Profile::C1Bessel => "C^1 at 0",
            Profile::Gaussian => "smooth",
            Profile::LogModified { .. } => "C^1 at 0; exponential continuation past r = 1/2 (C^1 match)",
            Profile::PowerGap { .. } if self.is_c1_at_origin() => "C^1 at 0 (gamma > 1)",
            Profile::PowerGap { .. } => "C^0 at 0 (gamma <= 1)",
            Profile::Tabulated(_) => "piecewise cubic interpolant; heuristic",
        }
    }

    /// `K(r)` for `r >= 0`.
    pub fn eval(&self, r: T) -> T {
        match &self.profile {
            Profile::Laplacian => (-r).exp(),
            Profile::C1Bessel => T::lit(2.0) * (T::one() + r) * (-r).exp(),
            Profile::Gaussian => (-r * r).exp(),
            Profile::LogModified { c, tail } => {
                if r == T::zero() {
                    T::one()
                } else if r <= tail.at {
                    T::one() - log_modified_gap(r, *c)
                } else {
                    tail.eval(r)
                }
            }
            Profile::PowerGap { d, gamma, switch, tail } => {
                if r <= *switch {
                    T::one() - *d * r.powf(*gamma)
                } else {
                    tail.eval(r)
                }
            }
            Profile::Tabulated(t) => t.eval(r),
        }
    }

    /// `K(0) - K(r)`, computed without cancellation near the origin.
    pub fn gap(&self, r: T) -> T {
        if r == T::zero() {
            return T::zero();
        }
        match &self.profile {
            Profile::Laplacian => -(-r).exp_m1(),
            Profile::C1Bessel => T::lit(2.0) * c1_half_gap(r),
            Profile::Gaussian => -(-r * r).exp_m1(),
            Profile::LogModified { c, tail } if r <= tail.at => log_modified_gap(r, *c),
            Profile::PowerGap { d, gamma, switch, .. } if r <= *switch => *d * r.powf(*gamma),
            Profile::Tabulated(t) => t.gap(r),
            _ => self.k0 - self.eval(r),
        }
    }

    /// `K'(r)` for `r > 0`. At `r = 0` this returns `K'(0+)`, which is only
    /// meaningful for kernels that are C^1 at the origin; use
    /// [`Kernel::deriv_checked`] when `r` may be zero.
    pub fn deriv(&self, r: T) -> T {
        match &self.profile {
            Profile::Laplacian => -(-r).exp(),
            Profile::C1Bessel => -T::lit(2.0) * r * (-r).exp(),
            Profile::Gaussian => -T::lit(2.0) * r * (-r * r).exp(),
            Profile::LogModified { c, tail } => {
                if r == T::zero() {
                    T::zero()
                } else if r <= tail.at {
                    log_modified_deriv(r, *c)
                } else {
                    tail.deriv(r)
                }
            }
            Profile::PowerGap { d, gamma, switch, tail } => {
                if r <= *switch {
                    -*d * *gamma * r.powf(*gamma - T::one())
                } else {
                    tail.deriv(r)
                }
            }
            Profile::Tabulated(t) => t.deriv(r),
        }
    }

    /// Like [`Kernel::deriv`] but refuses `r = 0` for kernels that are not C^1 there.
    pub fn deriv_checked(&self, r: T) -> Result<T> {
        if r < T::zero() {
            return Err(Error::InvalidArgument(format!("negative radius {r}")));
        }
        if r == T::zero() && !self.is_c1_at_origin() {
            return Err(Error::DerivativeAtOrigin);
        }
        Ok(self.deriv(r))
    }

    /// Checks positivity, strict decrease and derivative consistency on `grid`.
    pub fn validate(&self, grid: &[T]) -> Result<ValidationReport> {
        validate(self, grid)
    }
}

/// `K(0) - K(r)`.
pub fn gap<T: Real>(kernel: &Kernel<T>, r: T) -> Result<T> {
    if !(r >= T::zero()) {
        return Err(Error::InvalidArgument(format!("gap requires r >= 0, got {r}")));
    }
    Ok(kernel.gap(r))
}

/// Builds a validated kernel.
pub fn make_kernel<T: Real>(spec: &KernelSpec) -> Result<Kernel<T>> {
    Kernel::new(spec)
}

fn default_grid<T: Real>() -> Vec<T> {
    let mut g = vec![T::zero()];
    // In f32, exp(-r^2) leaves the range well before r = 20 and C^1 profiles
    // are flat to within rounding below r ~ 1e-2.
    let (r_min, r_max) = if T::epsilon() > T::lit(1e-10) { (3e-2, 5.0) } else { (1e-3, 20.0) };
    g.extend(logspace(T::lit(r_min), T::lit(r_max), 160));
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `K(0)` differs from the stored `k0`.
    Origin,
    Positivity,
    Monotonicity,
    /// `K'(r) >= 0` or disagreement with finite differences.
    Derivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest relative mismatch between `deriv` and central differences of `eval`.
    pub max_derivative_mismatch: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative finite-difference step.
fn fd_step<T: Real>() -> T {
    T::lit(1e-5).max(T::epsilon().cbrt())
}

/// Relative tolerance for `deriv` against central differences (1e-6 in `f64`).
fn deriv_rtol<T: Real>() -> f64 {
    1e-6f64.max(1e3 * T::epsilon().as_f64().powf(2.0 / 3.0))
}
/// Derivative consistency is only checked this far from the origin.
const DERIV_MIN_R: f64 = 1e-3;

pub fn validate<T: Real>(kernel: &Kernel<T>, grid: &[T]) -> Result<ValidationReport> {
    if grid.len() < 3
        || grid[0] < T::zero()
        || grid.windows(2).any(|w| !(w[1] > w[0]))
        || grid.iter().any(|g| !g.is_finite())
    {
        return Err(Error::GridTooSmall(grid.len()));
    }
    let mut violations = Vec::new();
    let mut push = |kind, r: T| violations.push(Violation { kind, r: r.as_f64() });
    let values: Vec<T> = grid.iter().map(|&r| kernel.eval(r)).collect();
    let mut max_mismatch = 0.0f64;
    for (k, (&r, &v)) in grid.iter().zip(&values).enumerate() {
        if r == T::zero() && v != kernel.k0() {
            push(ViolationKind::Origin, r);
        }
        if !(v > T::zero()) {
            push(ViolationKind::Positivity, r);
        }
        if k > 0 && !(v < values[k - 1]) {
            push(ViolationKind::Monotonicity, r);
        }
        if r > T::zero() {
            let d = kernel.deriv(r);
            if !(d < T::zero()) {
                push(ViolationKind::Derivative, r);
            } else if r >= T::lit(DERIV_MIN_R) {
                let h = fd_step::<T>() * r.min(T::one());
                // near the origin K(r+h) - K(r-h) is taken as a gap difference to avoid cancellation
                let fd = if kernel.gap(r) < kernel.k0() / T::lit(2.0) {
                    (kernel.gap(r - h) - kernel.gap(r + h)) / (h + h)
                } else {
                    (kernel.eval(r + h) - kernel.eval(r - h)) / (h + h)
                };
                let mismatch = ((d - fd) / d).abs().as_f64();
                max_mismatch = max_mismatch.max(mismatch);
                if mismatch > deriv_rtol::<T>() {
                    push(ViolationKind::Derivative, r);
                }
            }
        }
    }
    Ok(ValidationReport { violations, max_derivative_mismatch: max_mismatch })
}
