//! Dormand–Prince 5(4) with step-size control, continuous (dense) output and
//! event location on the dense output.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `dy/dt = f(t, y)`.
pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

/// A scalar event function; an event fires when it goes from positive to `<= 0`.
pub type EventFn<'a, T> = Box<dyn Fn(&[T]) -> T + 'a>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOpts<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
    /// Time accuracy of event location.
    pub event_tol: T,
}

impl<T: Real> Default for SolverOpts<T> {
    fn default() -> Self {
        SolverOpts {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            h0: None,
            h_max: None,
            max_steps: 1_000_000,
            event_tol: T::lit(1e-10),
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order solution minus embedded 4th-order solution
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Hairer's coefficients for the 4th-order continuous extension
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Interpolant over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<T> {
    pub t0: T,
    pub h: T,
    coeffs: [Vec<T>; 5],
}

impl<T: Real> DenseStep<T> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.coeffs[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stop<T> {
    Reached,
    /// Event `index` fired at time `t`.
    Event { index: usize, t: T },
    StepFailure { t: T, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Accepted grid, states and dense output of one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub dense: Vec<DenseStep<T>>,
    pub stop: Stop<T>,
    pub stats: Stats,
}

impl<T: Real> Solution<T> {
    pub fn t_final(&self) -> T {
        *self.times.last().expect("solution has the initial point")
    }

    /// State at `t` from the dense output; `None` outside the integrated range.
    pub fn sample(&self, t: T) -> Option<Vec<T>> {
        let t0 = self.times[0];
        if t < t0 || t > self.t_final() {
            return None;
        }
        if self.dense.is_empty() {
            return Some(self.states[0].clone());
        }
        let k = self.dense.partition_point(|s| s.t1() < t).min(self.dense.len() - 1);
        Some(self.dense[k].eval(t))
    }
}

fn error_norm<T: Real>(y0: &[T], y1: &[T], err: &[T], opts: &SolverOpts<T>) -> T {
    let n = y0.len();
    let sum = (0..n)
        .map(|i| {
            let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            e * e
        })
        .sum::<T>();
    (sum / T::from_count(n.max(1))).sqrt()
}

/// Integrates `sys` from `(t0, y0)` to `t_end`, stopping early at the first event.
pub fn solve<T: Real, S: OdeSystem<T> + ?Sized>(
    sys: &S,
    t0: T,
    y0: &[T],
    t_end: T,
    opts: &SolverOpts<T>,
    events: &[EventFn<'_, T>],
) -> Result<Solution<T>> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::Shape(format!("initial state has length {}, system dimension {n}", y0.len())));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!("t_end ({t_end}) must exceed t0 ({t0})")));
    }
    let mut stats = Stats::default();
    let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::zero(); n]);
    let mut ytmp = vec![T::zero(); n];
    let mut y = y0.to_vec();
    let mut t = t0;
    sys.rhs(t, &y, &mut k[0])?;
    stats.rhs_evals += 1;

    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span);
    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            let d0 = error_norm(&y, &y, &y, opts);
            let d1 = error_norm(&y, &y, &k[0], opts);
            let guess = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
                T::lit(1e-6)
            } else {
                T::lit(0.01) * d0 / d1
            };
            guess.min(span)
        }
    }
    .min(h_max);

    let mut sol = Solution {
        times: vec![t],
        states: vec![y.clone()],
        dense: Vec::new(),
        stop: Stop::Reached,
        stats: Stats::default(),
    };
    let mut ev_prev: Vec<T> = events.iter().map(|g| g(&y)).collect();
    let h_min_factor = T::epsilon() * T::lit(16.0);

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            sol.stop = Stop::StepFailure { t, reason: "maximum number of steps exceeded".into() };
            break;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= h_min_factor * t.abs().max(span) {
            sol.stop = Stop::StepFailure { t, reason: format!("step size underflow (h = {:e})", h.as_f64()) };
            break;
        }

        // stages 2..7
        let mut stage_ok = true;
        for s in 1..7 {
            for i in 0..n {
                let acc = (0..s).map(|j| T::lit(A[s][j]) * k[j][i]).sum::<T>();
                ytmp[i] = y[i] + h * acc;
            }
            let (_, tail) = k.split_at_mut(s);
            if sys.rhs(t + T::lit(C[s]) * h, &ytmp, &mut tail[0]).is_err()
                || tail[0].iter().any(|v| !v.is_finite())
            {
                stage_ok = false;
                break;
            }
            stats.rhs_evals += 1;
        }
        // ytmp now holds the 5th-order solution (stage 7 is evaluated there: FSAL)
        let err_norm = if stage_ok {
            let err: Vec<T> = (0..n)
                .map(|i| h * (0..7).map(|j| T::lit(E[j]) * k[j][i]).sum::<T>())
                .collect();
            error_norm(&y, &ytmp, &err, opts)
        } else {
            T::infinity()
        };

        if err_norm <= T::one() {
            let y_new = ytmp.clone();
            let ydiff: Vec<T> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let bspl: Vec<T> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
            let rc4: Vec<T> = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
            let rc5: Vec<T> = (0..n)
                .map(|i| h * (0..7).map(|j| T::lit(D[j]) * k[j][i]).sum::<T>())
                .collect();
            let step = DenseStep { t0: t, h, coeffs: [y.clone(), ydiff, bspl, rc4, rc5] };
            let t_new = if last { t_end } else { t + h };
            stats.accepted += 1;

            // event detection: endpoint plus interior probes of the interpolant
            let mut fired: Option<(usize, T)> = None;
            if !events.is_empty() {
                const PROBES: usize = 4;
                let mut lo_t = t;
                let mut lo_vals = ev_prev.clone();
                let mut probe = vec![T::zero(); n];
                'probe: for q in 1..=PROBES {
                    let tq = if q == PROBES { t_new } else { t + h * T::from_count(q) / T::from_count(PROBES) };
                    if q == PROBES {
                        probe.copy_from_slice(&y_new);
                    } else {
                        step.eval_into(tq, &mut probe);
                    }
                    let vals: Vec<T> = events.iter().map(|g| g(&probe)).collect();
                    for (e, g) in events.iter().enumerate() {
                        if lo_vals[e] > T::zero() && !(vals[e] > T::zero()) {
                            let te = bisect_event(&step, g, lo_t, tq, opts.event_tol, n);
                            if fired.is_none_or(|(_, tf)| te < tf) {
                                fired = Some((e, te));
                            }
                        }
                    }
                    if fired.is_some() {
                        break 'probe;
                    }
                    lo_t = tq;
                    lo_vals = vals;
                }
            }

            if let Some((index, te)) = fired {
                let ye = step.eval(te);
                sol.dense.push(step);
                sol.times.push(te);
                sol.states.push(ye);
                sol.stop = Stop::Event { index, t: te };
                break;
            }

            sol.dense.push(step);
            t = t_new;
            y = y_new;
            k[0] = k[6].clone();
            sol.times.push(t);
            sol.states.push(y.clone());
            ev_prev = events.iter().map(|g| g(&y)).collect();
        } else {
            stats.rejected += 1;
        }

        let fac = if err_norm == T::zero() {
            T::lit(10.0)
        } else if err_norm.is_finite() {
            (T::lit(0.9) * err_norm.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(10.0))
        } else {
            T::lit(0.25)
        };
        let fac = if err_norm > T::one() { fac.min(T::one()) } else { fac };
        h = (h * fac).min(h_max);
    }
    sol.stats = stats;
    Ok(sol)
}

fn bisect_event<T: Real>(step: &DenseStep<T>, g: &EventFn<'_, T>, mut lo: T, mut hi: T, tol: T, n: usize) -> T {
    let mut buf = vec![T::zero(); n];
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if !(mid > lo && mid < hi) {
            break;
        }
        step.eval_into(mid, &mut buf);
        if g(&buf) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<f64> for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let sol = solve(&Oscillator, 0.0, &[1.0, 0.0], 10.0, &SolverOpts::default(), &[]).unwrap();
        assert_eq!(sol.stop, Stop::Reached);
        let y = sol.states.last().unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
        assert_eq!(sol.t_final(), 10.0);
    }

    #[test]
    fn dense_output_accuracy() {
        let sol = solve(&Oscillator, 0.0, &[1.0, 0.0], 10.0, &SolverOpts::default(), &[]).unwrap();
        for k in 0..1000 {
            let t = 0.01 * k as f64;
            let y = sol.sample(t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert!(sol.sample(10.5).is_none());
    }

    #[test]
    fn event_location() {
        // y0 = cos t crosses 0.5 downward at t = pi/3
        let events: Vec<EventFn<f64>> = vec![Box::new(|y: &[f64]| y[0] - 0.5)];
        let sol = solve(&Oscillator, 0.0, &[1.0, 0.0], 10.0, &SolverOpts::default(), &events).unwrap();
        match sol.stop {
            Stop::Event { index: 0, t } => assert!((t - std::f64::consts::FRAC_PI_3).abs() < 1e-9),
            s => panic!("{s:?}"),
        }
    }

    struct Blowup;
    impl OdeSystem<f64> for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn finite_time_blowup_is_step_failure() {
        // y = 1/(1 - t)
        let sol = solve(&Blowup, 0.0, &[1.0], 2.0, &SolverOpts::default(), &[]).unwrap();
        match sol.stop {
            Stop::StepFailure { t, .. } => assert!((t - 1.0).abs() < 1e-3),
            s => panic!("{s:?}"),
        }
    }
}
