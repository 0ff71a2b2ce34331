//! Hamiltonian flow of `n` landmarks in `R^d`.
//!
//! With cometric blocks `K(|x_i - x_j|) I_d` the Hamiltonian is
//! `H = ½ Σ_{i,j} K(|x_i - x_j|) <p_i, p_j>` and Hamilton's equations read
//!
//! ```text
//! dx_i/dt =  Σ_j      K (|x_i - x_j|) p_j
//! dp_i/dt = -Σ_{j≠i}  K'(|x_i - x_j|) (x_i - x_j)/|x_i - x_j| <p_i, p_j>
//! ```
//!
//! The diagonal term of the position equation uses `K(0)` directly, so `K'`
//! is never evaluated at the origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::ode::{self, EventFn, OdeSystem, SolverOpts, Stop};
use crate::scalar::{dist, dot, norm, Real};

/// Positions and momenta, each stored row-major as `n` rows of length `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T> {
    n: usize,
    d: usize,
    pub x: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    /// Checks shapes and pairwise distinctness of the positions.
    pub fn new(n: usize, d: usize, x: Vec<T>, p: Vec<T>) -> Result<Self> {
        let s = Self::new_unchecked(n, d, x, p)?;
        if let Some((i, j, _)) = s.closest_pair().filter(|&(_, _, r)| !(r > T::zero())) {
            return Err(Error::Collided(i, j));
        }
        Ok(s)
    }

    /// Checks shapes only.
    pub fn new_unchecked(n: usize, d: usize, x: Vec<T>, p: Vec<T>) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::Shape(format!("need n >= 2 landmarks and d >= 1, got n={n}, d={d}")));
        }
        if x.len() != n * d || p.len() != n * d {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got x: {}, p: {}",
                n * d,
                x.len(),
                p.len()
            )));
        }
        Ok(PhasePoint { n, d, x, p })
    }

    pub fn from_rows(x: &[Vec<T>], p: &[Vec<T>]) -> Result<Self> {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        if p.len() != n || x.iter().chain(p).any(|row| row.len() != d) {
            return Err(Error::Shape("ragged position/momentum rows".into()));
        }
        Self::new(n, d, x.concat(), p.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn xi(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn pi(&self, i: usize) -> &[T] {
        &self.p[i * self.d..(i + 1) * self.d]
    }

    /// `(i, j, |x_i - x_j|)` for the closest pair.
    pub fn closest_pair(&self) -> Option<(usize, usize, T)> {
        closest_pair(&self.x, self.n, self.d)
    }

    pub(crate) fn to_flat(&self) -> Vec<T> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.p);
        y
    }

    pub(crate) fn from_flat(n: usize, d: usize, y: &[T]) -> Self {
        let m = n * d;
        PhasePoint { n, d, x: y[..m].to_vec(), p: y[m..2 * m].to_vec() }
    }
}

fn closest_pair<T: Real>(x: &[T], n: usize, d: usize) -> Option<(usize, usize, T)> {
    let mut best: Option<(usize, usize, T)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            if best.is_none_or(|b| r < b.2) {
                best = Some((i, j, r));
            }
        }
    }
    best
}

/// `H = ½ Σ_{i,j} K(|x_i - x_j|) <p_i, p_j>`, evaluated as
/// `½ K(0) |Σ p_i|² - Σ_{i<j} (K(0) - K(r_ij)) <p_i, p_j>`.
///
/// The two forms are equal; the second stays accurate near a collision,
/// where the momenta of the approaching pair grow without bound while their
/// contributions to the direct sum cancel.
pub fn hamiltonian<T: Real>(s: &PhasePoint<T>, kernel: &Kernel<T>) -> T {
    let mut total = vec![T::zero(); s.d];
    let mut h = T::zero();
    for i in 0..s.n {
        for (acc, v) in total.iter_mut().zip(s.pi(i)) {
            *acc = *acc + *v;
        }
        for j in i + 1..s.n {
            h = h - kernel.gap(dist(s.xi(i), s.xi(j))) * dot(s.pi(i), s.pi(j));
        }
    }
    h + kernel.k0() * dot(&total, &total) / T::lit(2.0)
}

/// Right-hand side of Hamilton's equations, written into `dx` and `dp`.
pub(crate) fn rhs_into<T: Real>(
    x: &[T],
    p: &[T],
    n: usize,
    d: usize,
    kernel: &Kernel<T>,
    dx: &mut [T],
    dp: &mut [T],
) -> Result<()> {
    let k0 = kernel.k0();
    for i in 0..n * d {
        dx[i] = k0 * p[i];
        dp[i] = T::zero();
    }
    let mut diff = vec![T::zero(); d];
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..d {
                diff[k] = x[i * d + k] - x[j * d + k];
            }
            let r = norm(&diff);
            if !(r > T::zero()) {
                return Err(Error::Collided(i, j));
            }
            let kr = kernel.eval(r);
            let pij = dot(&p[i * d..(i + 1) * d], &p[j * d..(j + 1) * d]);
            let force = kernel.deriv(r) / r * pij;
            for k in 0..d {
                dx[i * d + k] = dx[i * d + k] + kr * p[j * d + k];
                dx[j * d + k] = dx[j * d + k] + kr * p[i * d + k];
                let f = force * diff[k];
                dp[i * d + k] = dp[i * d + k] - f;
                dp[j * d + k] = dp[j * d + k] + f;
            }
        }
    }
    Ok(())
}

/// `(dx/dt, dp/dt)` at `s`.
pub fn rhs<T: Real>(s: &PhasePoint<T>, kernel: &Kernel<T>) -> Result<(Vec<T>, Vec<T>)> {
    let m = s.n * s.d;
    let mut dx = vec![T::zero(); m];
    let mut dp = vec![T::zero(); m];
    rhs_into(&s.x, &s.p, s.n, s.d, kernel, &mut dx, &mut dp)?;
    Ok((dx, dp))
}

/// `y ∧ z`: entries `y_k z_l - y_l z_k` for `k < l`, in lexicographic order.
pub fn wedge<T: Real>(y: &[T], z: &[T]) -> Result<Vec<T>> {
    if y.len() != z.len() {
        return Err(Error::Shape(format!("wedge of vectors of length {} and {}", y.len(), z.len())));
    }
    let d = y.len();
    let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for k in 0..d {
        for l in k + 1..d {
            out.push(y[k] * z[l] - y[l] * z[k]);
        }
    }
    Ok(out)
}

/// Energy, total momentum and total angular momentum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservedSet<T> {
    #[serde(rename = "H")]
    pub h: T,
    #[serde(rename = "P")]
    pub p: Vec<T>,
    #[serde(rename = "L")]
    pub l: Vec<T>,
}

pub fn conserved<T: Real>(s: &PhasePoint<T>, kernel: &Kernel<T>) -> ConservedSet<T> {
    let d = s.d;
    let mut p = vec![T::zero(); d];
    let mut l = vec![T::zero(); d * d.saturating_sub(1) / 2];
    for i in 0..s.n {
        for k in 0..d {
            p[k] = p[k] + s.pi(i)[k];
        }
        let w = wedge(s.xi(i), s.pi(i)).expect("rows share dimension d");
        for (acc, v) in l.iter_mut().zip(w) {
            *acc = *acc + v;
        }
    }
    ConservedSet { h: hamiltonian(s, kernel), p, l }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntOpts<T> {
    pub rtol: T,
    pub atol: T,
    /// A collision is reported when the closest pair comes within this distance.
    pub collision_eps: T,
    /// An escape is reported when some `|x_i|` exceeds this radius.
    pub escape_radius: T,
    pub max_steps: usize,
    pub event_tol: T,
}

impl<T: Real> Default for IntOpts<T> {
    fn default() -> Self {
        IntOpts {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            collision_eps: T::lit(1e-6),
            escape_radius: T::lit(1e6),
            max_steps: 2_000_000,
            event_tol: T::lit(1e-10),
        }
    }
}

impl<T: Real> IntOpts<T> {
    pub(crate) fn solver(&self) -> SolverOpts<T> {
        SolverOpts {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            event_tol: self.event_tol,
            ..SolverOpts::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination<T> {
    ReachedTEnd,
    Collision { pair: (usize, usize), t_event: T },
    Escape { index: usize, t_event: T },
    StepFailure { t: T, reason: String },
}

/// Largest deviation from the initial value along the trajectory, relative
/// to the quantity's natural scale: `|H(0)|` for the energy, `Σ|p_i(0)|` for
/// components of `P`, and `Σ|x_i(0)||p_i(0)|` for components of `L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservedDrift<T> {
    #[serde(rename = "H")]
    pub h: T,
    #[serde(rename = "P")]
    pub p: Vec<T>,
    #[serde(rename = "L")]
    pub l: Vec<T>,
}

impl<T: Real> ConservedDrift<T> {
    pub fn max(&self) -> T {
        self.p.iter().chain(&self.l).copied().fold(self.h, T::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<PhasePoint<T>>,
    pub conserved: Vec<ConservedSet<T>>,
    pub conserved_drift: ConservedDrift<T>,
    pub termination: Termination<T>,
    solution: ode::Solution<T>,
    n: usize,
    d: usize,
}

impl<T: Real> Trajectory<T> {
    /// Dense-output state at `t` within the integrated range.
    pub fn state_at(&self, t: T) -> Option<PhasePoint<T>> {
        self.solution.sample(t).map(|y| PhasePoint::from_flat(self.n, self.d, &y))
    }

    pub fn t_final(&self) -> T {
        *self.times.last().expect("nonempty")
    }

    pub fn final_state(&self) -> &PhasePoint<T> {
        self.states.last().expect("nonempty")
    }

    pub fn stats(&self) -> &ode::Stats {
        &self.solution.stats
    }
}

struct LandmarkSystem<'a, T: Real> {
    n: usize,
    d: usize,
    kernel: &'a Kernel<T>,
}

impl<T: Real> OdeSystem<T> for LandmarkSystem<'_, T> {
    fn dim(&self) -> usize {
        2 * self.n * self.d
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let m = self.n * self.d;
        let (x, p) = y.split_at(m);
        let (dx, dp) = dy.split_at_mut(m);
        rhs_into(x, p, self.n, self.d, self.kernel, dx, dp)
    }
}

fn drift_of<T: Real>(series: &[ConservedSet<T>], s0: &PhasePoint<T>) -> ConservedDrift<T> {
    let c0 = &series[0];
    let tiny = T::min_positive_value();
    let p_scale = (0..s0.n).map(|i| norm(s0.pi(i))).sum::<T>().max(tiny);
    let l_scale = (0..s0.n)
        .map(|i| norm(s0.xi(i)) * norm(s0.pi(i)))
        .sum::<T>()
        .max(tiny);
    let h_scale = c0.h.abs().max(tiny);
    let mut drift = ConservedDrift {
        h: T::zero(),
        p: vec![T::zero(); c0.p.len()],
        l: vec![T::zero(); c0.l.len()],
    };
    for c in series {
        drift.h = drift.h.max((c.h - c0.h).abs() / h_scale);
        for (k, v) in c.p.iter().enumerate() {
            drift.p[k] = drift.p[k].max((*v - c0.p[k]).abs() / p_scale);
        }
        for (k, v) in c.l.iter().enumerate() {
            drift.l[k] = drift.l[k].max((*v - c0.l[k]).abs() / l_scale);
        }
    }
    drift
}

/// Integrates Hamilton's equations from `s0` up to `t_end`, stopping at a
/// collision (closest pair within `collision_eps`), an escape, or a failure
/// of the step-size controller.
pub fn integrate<T: Real>(s0: &PhasePoint<T>, kernel: &Kernel<T>, t_end: T, opts: &IntOpts<T>) -> Result<Trajectory<T>> {
    let (n, d) = (s0.n, s0.d);
    if let Some((i, j, r)) = s0.closest_pair() {
        if !(r > opts.collision_eps) {
            return Err(Error::Collided(i, j));
        }
    }
    let sys = LandmarkSystem { n, d, kernel };
    let m = n * d;
    let eps = opts.collision_eps;
    let radius = opts.escape_radius;
    let events: Vec<EventFn<T>> = vec![
        Box::new(move |y: &[T]| closest_pair(&y[..m], n, d).map_or(T::one(), |c| c.2 - eps)),
        Box::new(move |y: &[T]| {
            radius - (0..n).map(|i| norm(&y[i * d..(i + 1) * d])).fold(T::zero(), T::max)
        }),
    ];
    let sol = ode::solve(&sys, T::zero(), &s0.to_flat(), t_end, &opts.solver(), &events)?;
    let states: Vec<PhasePoint<T>> = sol.states.iter().map(|y| PhasePoint::from_flat(n, d, y)).collect();
    let termination = match &sol.stop {
        Stop::Reached => Termination::ReachedTEnd,
        Stop::Event { index: 0, t } => {
            let (i, j, _) = states.last().and_then(PhasePoint::closest_pair).expect("n >= 2");
            Termination::Collision { pair: (i, j), t_event: *t }
        }
        Stop::Event { t, .. } => {
            let last = states.last().expect("nonempty");
            let index = (0..n)
                .max_by(|&a, &b| {
                    norm(last.xi(a))
                        .partial_cmp(&norm(last.xi(b)))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("n >= 2");
            Termination::Escape { index, t_event: *t }
        }
        Stop::StepFailure { t, reason } => Termination::StepFailure { t: *t, reason: reason.clone() },
    };
    let conserved: Vec<ConservedSet<T>> = states.iter().map(|s| self::conserved(s, kernel)).collect();
    let conserved_drift = drift_of(&conserved, s0);
    Ok(Trajectory {
        times: sol.times.clone(),
        states,
        conserved,
        conserved_drift,
        termination,
        solution: sol,
        n,
        d,
    })
}
