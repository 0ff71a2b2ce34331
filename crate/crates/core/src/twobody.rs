//! The two-landmark system in center-of-mass coordinates
//! `u = x_1 - x_2`, `v = (x_1 + x_2)/2`, `P = p_1 + p_2`, `Q = (p_1 - p_2)/2`:
//!
//! ```text
//! du/dt = 2 (K(0) - K(r)) Q            dP/dt = 0
//! dv/dt = ½ (K(0) + K(r)) P            dQ/dt = K'(r) u / r (|Q|² - c)
//! ```
//!
//! with `r = |u|` and `c = |P|²/4`. Besides `P`, the flow conserves
//! `D = (K(0) - K(r))(|Q|² - c)` and `ω = |u ∧ Q|`.

use serde::Serialize;

use crate::completeness::{classify_geodesic, improper_integral, Geodesic, IntegralStatus, QuadOpts};
use crate::dynamics::{wedge, IntOpts, PhasePoint, Termination};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec};
use crate::ode::{self, EventFn, OdeSystem, Stop};
use crate::scalar::{dot, norm, Real};

/// Below this, `ω` counts as zero (head-on data).
pub const HEAD_ON_OMEGA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoBodyState<T> {
    pub u: Vec<T>,
    #[serde(rename = "Q")]
    pub q: Vec<T>,
    pub v: Vec<T>,
    #[serde(rename = "P")]
    pub p: Vec<T>,
    /// `|P|² / 4`.
    pub c: T,
}

impl<T: Real> TwoBodyState<T> {
    pub fn new(u: Vec<T>, q: Vec<T>, v: Vec<T>, p: Vec<T>) -> Result<Self> {
        let d = u.len();
        if d == 0 || q.len() != d || v.len() != d || p.len() != d {
            return Err(Error::Shape(format!(
                "u, Q, v, P must share a positive dimension, got {}, {}, {}, {}",
                u.len(),
                q.len(),
                v.len(),
                p.len()
            )));
        }
        if !(norm(&u) > T::zero()) {
            return Err(Error::Collided(0, 1));
        }
        let c = dot(&p, &p) / T::lit(4.0);
        Ok(TwoBodyState { u, q, v, p, c })
    }

    /// State with `v = 0` and `P = 2 sqrt(c) e_1`.
    pub fn from_reduced(u: Vec<T>, q: Vec<T>, c: T) -> Result<Self> {
        if c < T::zero() {
            return Err(Error::InvalidArgument(format!("c must be non-negative, got {c}")));
        }
        let d = u.len();
        let mut p = vec![T::zero(); d];
        if let Some(p0) = p.first_mut() {
            *p0 = T::lit(2.0) * c.sqrt();
        }
        let mut s = Self::new(u, q, vec![T::zero(); d], p)?;
        s.c = c;
        Ok(s)
    }

    pub fn d(&self) -> usize {
        self.u.len()
    }

    pub fn r(&self) -> T {
        norm(&self.u)
    }
}

pub fn to_com<T: Real>(s: &PhasePoint<T>) -> Result<TwoBodyState<T>> {
    if s.n() != 2 {
        return Err(Error::Shape(format!("center-of-mass form needs n = 2, got {}", s.n())));
    }
    let half = T::lit(0.5);
    let (x1, x2, p1, p2) = (s.xi(0), s.xi(1), s.pi(0), s.pi(1));
    let u = x1.iter().zip(x2).map(|(a, b)| *a - *b).collect();
    let v = x1.iter().zip(x2).map(|(a, b)| (*a + *b) * half).collect();
    let p = p1.iter().zip(p2).map(|(a, b)| *a + *b).collect();
    let q = p1.iter().zip(p2).map(|(a, b)| (*a - *b) * half).collect();
    TwoBodyState::new(u, q, v, p)
}

pub fn from_com<T: Real>(tb: &TwoBodyState<T>) -> PhasePoint<T> {
    let half = T::lit(0.5);
    let d = tb.d();
    let mut x = Vec::with_capacity(2 * d);
    let mut p = Vec::with_capacity(2 * d);
    x.extend((0..d).map(|k| tb.v[k] + half * tb.u[k]));
    x.extend((0..d).map(|k| tb.v[k] - half * tb.u[k]));
    p.extend((0..d).map(|k| half * tb.p[k] + tb.q[k]));
    p.extend((0..d).map(|k| half * tb.p[k] - tb.q[k]));
    PhasePoint::new_unchecked(2, d, x, p).expect("shapes agree by construction")
}

fn reduced_rhs_into<T: Real>(
    u: &[T],
    q: &[T],
    p: &[T],
    c: T,
    kernel: &Kernel<T>,
    du: &mut [T],
    dq: &mut [T],
    dv: &mut [T],
) -> Result<()> {
    let r = norm(u);
    if !(r > T::zero()) {
        return Err(Error::Collided(0, 1));
    }
    let two_gap = T::lit(2.0) * kernel.gap(r);
    let dq_scale = kernel.deriv(r) / r * (dot(q, q) - c);
    let dv_scale = (kernel.k0() + kernel.eval(r)) / T::lit(2.0);
    for k in 0..u.len() {
        du[k] = two_gap * q[k];
        dq[k] = dq_scale * u[k];
        dv[k] = dv_scale * p[k];
    }
    Ok(())
}

/// `(du/dt, dQ/dt, dv/dt)`.
pub fn reduced_rhs<T: Real>(tb: &TwoBodyState<T>, kernel: &Kernel<T>) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let d = tb.d();
    let (mut du, mut dq, mut dv) = (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]);
    reduced_rhs_into(&tb.u, &tb.q, &tb.p, tb.c, kernel, &mut du, &mut dq, &mut dv)?;
    Ok((du, dq, dv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Invariants<T> {
    #[serde(rename = "D")]
    pub d: T,
    pub omega: T,
}

/// `D = (K(0) - K(r))(|Q|² - c)` and `ω = |u ∧ Q|` (zero when `d = 1`).
pub fn invariants_2b<T: Real>(tb: &TwoBodyState<T>, kernel: &Kernel<T>) -> Invariants<T> {
    let d = kernel.gap(tb.r()) * (dot(&tb.q, &tb.q) - tb.c);
    let omega = norm(&wedge(&tb.u, &tb.q).expect("u and Q share dimension"));
    Invariants { d, omega }
}

/// State layout `[u, Q, v]`; `P` and `c` are constants of the motion.
pub struct ReducedSystem<'a, T: Real> {
    kernel: &'a Kernel<T>,
    p: Vec<T>,
    c: T,
}

impl<'a, T: Real> ReducedSystem<'a, T> {
    pub fn new(kernel: &'a Kernel<T>, tb: &TwoBodyState<T>) -> Self {
        ReducedSystem { kernel, p: tb.p.clone(), c: tb.c }
    }
}

impl<T: Real> OdeSystem<T> for ReducedSystem<'_, T> {
    fn dim(&self) -> usize {
        3 * self.p.len()
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let d = self.p.len();
        let (du, rest) = dy.split_at_mut(d);
        let (dq, dv) = rest.split_at_mut(d);
        reduced_rhs_into(&y[..d], &y[d..2 * d], &self.p, self.c, self.kernel, du, dq, dv)
    }
}

/// Largest relative deviation of `D` and `ω` from their initial values
/// (absolute when the initial value is zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantDrift<T> {
    #[serde(rename = "D")]
    pub d: T,
    pub omega: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<TwoBodyState<T>>,
    pub invariants: Vec<Invariants<T>>,
    pub drift: InvariantDrift<T>,
    /// Smallest separation seen at accepted steps and dense-output probes.
    pub min_r: T,
    pub termination: Termination<T>,
}

/// Integrates the reduced system with the same solver, collision and escape
/// events as the full landmark flow.
pub fn simulate<T: Real>(tb: &TwoBodyState<T>, kernel: &Kernel<T>, t_end: T, opts: &IntOpts<T>) -> Result<TwoBodyTrajectory<T>> {
    let d = tb.d();
    if !(tb.r() > opts.collision_eps) {
        return Err(Error::Collided(0, 1));
    }
    let sys = ReducedSystem::new(kernel, tb);
    let eps = opts.collision_eps;
    let radius = opts.escape_radius;
    let half = T::lit(0.5);
    let landmark_norms = move |y: &[T]| {
        let a: Vec<T> = (0..d).map(|k| y[2 * d + k] + half * y[k]).collect();
        let b: Vec<T> = (0..d).map(|k| y[2 * d + k] - half * y[k]).collect();
        (norm(&a), norm(&b))
    };
    let events: Vec<EventFn<T>> = vec![
        Box::new(move |y: &[T]| norm(&y[..d]) - eps),
        Box::new(move |y: &[T]| {
            let (a, b) = landmark_norms(y);
            radius - a.max(b)
        }),
    ];
    let y0: Vec<T> = tb.u.iter().chain(&tb.q).chain(&tb.v).copied().collect();
    let sol = ode::solve(&sys, T::zero(), &y0, t_end, &opts.solver(), &events)?;
    let unpack = |y: &[T]| TwoBodyState {
        u: y[..d].to_vec(),
        q: y[d..2 * d].to_vec(),
        v: y[2 * d..].to_vec(),
        p: tb.p.clone(),
        c: tb.c,
    };
    let states: Vec<TwoBodyState<T>> = sol.states.iter().map(|y| unpack(y)).collect();
    let invariants: Vec<Invariants<T>> = states.iter().map(|s| invariants_2b(s, kernel)).collect();
    let inv0 = invariants[0];
    let rel = |x: T, x0: T| {
        if x0 == T::zero() {
            x.abs()
        } else {
            ((x - x0) / x0).abs()
        }
    };
    let drift = invariants.iter().fold(InvariantDrift { d: T::zero(), omega: T::zero() }, |acc, inv| InvariantDrift {
        d: acc.d.max(rel(inv.d, inv0.d)),
        omega: acc.omega.max(rel(inv.omega, inv0.omega)),
    });
    let mut min_r = states.iter().map(TwoBodyState::r).fold(T::infinity(), T::min);
    for step in &sol.dense {
        for k in 1..8 {
            let t = step.t0 + step.h * T::from_count(k) / T::lit(8.0);
            min_r = min_r.min(norm(&step.eval(t)[..d]));
        }
    }
    let termination = match &sol.stop {
        Stop::Reached => Termination::ReachedTEnd,
        Stop::Event { index: 0, t } => Termination::Collision { pair: (0, 1), t_event: *t },
        Stop::Event { t, .. } => {
            let (a, b) = landmark_norms(sol.states.last().expect("nonempty"));
            Termination::Escape { index: usize::from(b > a), t_event: *t }
        }
        Stop::StepFailure { t, reason } => Termination::StepFailure { t: *t, reason: reason.clone() },
    };
    Ok(TwoBodyTrajectory { times: sol.times, states, invariants, drift, min_r, termination })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "T", rename_all = "snake_case")]
pub enum CollisionTime<T> {
    Finite(T),
    NonCollapsing,
    Inconclusive,
}

impl<T: Copy> CollisionTime<T> {
    pub fn finite(&self) -> Option<T> {
        match self {
            CollisionTime::Finite(t) => Some(*t),
            _ => None,
        }
    }
}

/// Time for head-on data with energy `E` and `P = 0` to collapse from
/// separation `a`: `T = ∫_0^a dr / (2 sqrt(E) sqrt(K(0) - K(r)))`.
pub fn collision_time<T: Real>(kernel: &Kernel<T>, a: T, e: T) -> Result<CollisionTime<T>> {
    if !(e > T::zero()) {
        return Err(Error::InvalidArgument(format!("energy must be positive, got {e}")));
    }
    let verdict = improper_integral(crate::completeness::criterion_integrand(kernel), a, &QuadOpts::default())?;
    Ok(match verdict.status {
        IntegralStatus::Convergent(i) => CollisionTime::Finite(i / (T::lit(2.0) * e.sqrt())),
        IntegralStatus::Divergent => CollisionTime::NonCollapsing,
        IntegralStatus::Inconclusive => CollisionTime::Inconclusive,
    })
}

/// Head-on collapse from separation `a` with invariants `D > 0` and `c`:
/// `T = ∫_0^a dr / (2 sqrt(gap) sqrt(D + c gap))`; reduces to
/// [`collision_time`] with `E = D` when `c = 0`.
pub fn head_on_collision_time<T: Real>(kernel: &Kernel<T>, a: T, d: T, c: T) -> Result<CollisionTime<T>> {
    if c == T::zero() {
        return collision_time(kernel, a, d);
    }
    if !(d > T::zero()) || c < T::zero() {
        return Err(Error::InvalidArgument(format!("need D > 0 and c >= 0, got D = {d}, c = {c}")));
    }
    let two = T::lit(2.0);
    let f = |r: T| {
        let g = kernel.gap(r);
        T::one() / (two * g.sqrt() * (d + c * g).sqrt())
    };
    let verdict = improper_integral(f, a, &QuadOpts::default())?;
    Ok(match verdict.status {
        IntegralStatus::Convergent(t) => CollisionTime::Finite(t),
        IntegralStatus::Divergent => CollisionTime::NonCollapsing,
        IntegralStatus::Inconclusive => CollisionTime::Inconclusive,
    })
}

/// Upper limit used when a kernel's completeness criterion is evaluated on
/// its own: 0.4 for `log_modified` (inside its closed-form window), 1 otherwise.
pub fn default_radius<T: Real>(kernel: &Kernel<T>) -> T {
    match kernel.spec() {
        KernelSpec::LogModified { .. } => T::lit(0.4),
        _ => T::one(),
    }
}

/// The exact Laplacian-kernel solution: `x_1 = -x_2 = log cosh(b(T - t))`,
/// `p_1 = -p_2 = -b / tanh(b(T - t))`, colliding at `t = T`.
pub fn laplacian_exact<T: Real>(b: T, t_collide: T, t: T) -> Result<PhasePoint<T>> {
    if !(b > T::zero()) || !(t_collide > T::zero()) {
        return Err(Error::InvalidArgument(format!("need b > 0 and T > 0, got b = {b}, T = {t_collide}")));
    }
    if !(t >= T::zero() && t < t_collide) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, {t_collide}), got {t}")));
    }
    let s = b * (t_collide - t);
    let half_sinh = (s / T::lit(2.0)).sinh();
    // log cosh s = log(1 + 2 sinh²(s/2)), accurate as s -> 0
    let x1 = (T::lit(2.0) * half_sinh * half_sinh).ln_1p();
    let p1 = -b / s.tanh();
    PhasePoint::new(2, 1, vec![x1, -x1], vec![p1, -p1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GlobalExistence,
    FiniteTimeCollision,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast<T> {
    #[serde(rename = "D")]
    pub d: T,
    pub omega: T,
    pub verdict: Verdict,
    /// Certified lower bound on the separation for all time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<T>,
    #[serde(rename = "predicted_T", skip_serializing_if = "Option::is_none")]
    pub predicted_t: Option<T>,
    pub evidence: String,
}

/// Smallest `r` with `gap(r) >= target`, by bisection on `(0, hi]`.
fn gap_level<T: Real>(kernel: &Kernel<T>, target: T, hi: T) -> T {
    let (mut lo, mut hi) = (T::zero(), hi);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if kernel.gap(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    lo
}

/// Whether the two landmarks can collide in finite time.
///
/// Non-zero `ω` rules collision out for every kernel; with `D <= 0` the
/// separation is then bounded below by `ω / sqrt(c)`. Head-on data
/// (`ω = 0`) moves on the line through `u` and reduces to
/// `r' = 2 gap s`, `s' = K'(r)(s² - c)` with `s = <Q, u/r>`: an outward
/// orbit never turns back, an inward one with `D < 0` turns at
/// `gap(r*) = -D/c`, and an inward one with `D >= 0` collapses in the time
/// given by [`head_on_collision_time`] whenever that integral converges.
pub fn breakdown_forecast<T: Real>(tb: &TwoBodyState<T>, kernel: &Kernel<T>) -> Result<Forecast<T>> {
    let r = tb.r();
    if !(r > T::zero()) {
        return Err(Error::Collided(0, 1));
    }
    let inv = invariants_2b(tb, kernel);
    let forecast = |verdict, bound, predicted_t, evidence: &str| Forecast {
        d: inv.d,
        omega: inv.omega,
        verdict,
        bound,
        predicted_t,
        evidence: evidence.to_string(),
    };
    if inv.omega >= T::lit(HEAD_ON_OMEGA) {
        return Ok(if inv.d <= T::zero() && tb.c > T::zero() {
            forecast(Verdict::GlobalExistence, Some(inv.omega / tb.c.sqrt()), None, "nonzero angular momentum, Case 1 (D <= 0)")
        } else {
            forecast(Verdict::GlobalExistence, None, None, "nonzero angular momentum, Case 2 (D > 0)")
        });
    }
    let radial = dot(&tb.u, &tb.q);
    if radial >= T::zero() {
        return Ok(forecast(Verdict::GlobalExistence, Some(r), None, "head-on, outward: separation never decreases"));
    }
    if inv.d < T::zero() {
        let r_turn = gap_level(kernel, -inv.d / tb.c, r);
        return Ok(forecast(Verdict::GlobalExistence, Some(r_turn), None, "head-on, inward with D < 0: turns back where gap = -D/c"));
    }
    let classification = classify_geodesic(kernel, default_radius(kernel))?;
    if classification.geodesic == Geodesic::Complete {
        return Ok(forecast(Verdict::GlobalExistence, None, None, "head-on, kernel geodesically complete"));
    }
    if inv.d == T::zero() && tb.c == T::zero() {
        return Ok(forecast(Verdict::GlobalExistence, Some(r), None, "at rest"));
    }
    if inv.d == T::zero() {
        return Ok(forecast(Verdict::Inconclusive, None, None, "head-on, inward with D = 0"));
    }
    Ok(match head_on_collision_time(kernel, r, inv.d, tb.c)? {
        CollisionTime::Finite(t) => forecast(Verdict::FiniteTimeCollision, None, Some(t), "head-on, inward, convergent collapse integral"),
        CollisionTime::NonCollapsing => forecast(Verdict::GlobalExistence, None, None, "head-on, inward, divergent collapse integral"),
        CollisionTime::Inconclusive => forecast(Verdict::Inconclusive, None, None, "collapse integral inconclusive"),
    })
}
