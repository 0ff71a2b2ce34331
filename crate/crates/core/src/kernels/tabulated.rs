//! Monotone cubic (Fritsch–Carlson) interpolation of tabulated kernel samples.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::ExpTail;

pub(crate) fn check_samples(samples: &[(f64, f64)]) -> Result<()> {
    check_shape(samples)?;
    for w in samples.windows(2) {
        if !(w[1].1 < w[0].1) {
            return Err(Error::Tabulated(format!(
                "values must be strictly decreasing; violation at r = {}",
                w[1].0
            )));
        }
    }
    Ok(())
}

fn check_shape(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Tabulated("need at least two samples".into()));
    }
    if samples[0].0 != 0.0 {
        return Err(Error::Tabulated("samples must include r = 0 (the value K(0))".into()));
    }
    for &(r, v) in samples {
        if !r.is_finite() || !v.is_finite() {
            return Err(Error::Tabulated(format!("non-finite sample ({r}, {v})")));
        }
        if !(v > 0.0) {
            return Err(Error::Tabulated(format!("kernel values must be positive; got {v} at r = {r}")));
        }
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Tabulated(format!(
                "radii must be strictly increasing; violation at r = {}",
                w[1].0
            )));
        }
    }
    Ok(())
}

/// Power-law model of the gap `K(0) - K(r) = D r^gamma` used below the first positive sample.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PowerHead<T> {
    pub d: T,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tabulated<T> {
    r: Vec<T>,
    v: Vec<T>,
    slope: Vec<T>,
    head: Option<PowerHead<T>>,
    tail: ExpTail<T>,
}

impl<T: Real> Tabulated<T> {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        check_samples(samples)?;
        Ok(Self::build(samples))
    }

    /// Skips the monotonicity check so `validate` can report violations on bad data.
    pub fn new_unchecked(samples: &[(f64, f64)]) -> Result<Self> {
        check_shape(samples)?;
        Ok(Self::build(samples))
    }

    fn build(samples: &[(f64, f64)]) -> Self {
        let r: Vec<T> = samples.iter().map(|s| T::lit(s.0)).collect();
        let v: Vec<T> = samples.iter().map(|s| T::lit(s.1)).collect();
        let n = r.len();
        let h: Vec<T> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|k| (v[k + 1] - v[k]) / h[k]).collect();
        let mut slope = vec![T::zero(); n];
        if n == 2 {
            slope = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                if d0 * d1 > T::zero() {
                    let w1 = T::lit(2.0) * h[k] + h[k - 1];
                    let w2 = h[k] + T::lit(2.0) * h[k - 1];
                    slope[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }

        let k0 = v[0];
        let head = (n >= 3)
            .then(|| {
                let (g1, g2) = (k0 - v[1], k0 - v[2]);
                if g1 > T::zero() && g2 > g1 {
                    let gamma = (g2 / g1).ln() / (r[2] / r[1]).ln();
                    Some(PowerHead { d: g1 / r[1].powf(gamma), gamma })
                } else {
                    None
                }
            })
            .flatten();

        let (rn, vn) = (r[n - 1], v[n - 1]);
        let end = if slope[n - 1] < T::zero() { slope[n - 1] } else { delta[n - 2] };
        let rate = if end < T::zero() { -end / vn } else { T::lit(1e-8) };
        let tail = ExpTail { at: rn, value: vn, rate };
        Tabulated { r, v, slope, head, tail }
    }

    pub fn k0(&self) -> T {
        self.v[0]
    }

    fn locate(&self, x: T) -> usize {
        // index k with r[k] <= x < r[k+1]
        match self.r.binary_search_by(|p| p.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(k) => k.min(self.r.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.r.len() - 2),
        }
    }

    fn in_head(&self, x: T) -> Option<&PowerHead<T>> {
        self.head.as_ref().filter(|_| x < self.r[1])
    }

    pub fn eval(&self, x: T) -> T {
        if x == T::zero() {
            return self.k0();
        }
        if let Some(h) = self.in_head(x) {
            return self.k0() - h.d * x.powf(h.gamma);
        }
        if x >= self.tail.at {
            return self.tail.eval(x);
        }
        let k = self.locate(x);
        let hk = self.r[k + 1] - self.r[k];
        let t = (x - self.r[k]) / hk;
        let (two, three) = (T::lit(2.0), T::lit(3.0));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.v[k] + h10 * hk * self.slope[k] + h01 * self.v[k + 1] + h11 * hk * self.slope[k + 1]
    }

    pub fn gap(&self, x: T) -> T {
        match self.in_head(x) {
            Some(h) if x > T::zero() => h.d * x.powf(h.gamma),
            _ => self.k0() - self.eval(x),
        }
    }

    pub fn deriv(&self, x: T) -> T {
        if let Some(h) = self.in_head(x) {
            return -h.d * h.gamma * x.powf(h.gamma - T::one());
        }
        if x >= self.tail.at {
            return self.tail.deriv(x);
        }
        let k = self.locate(x);
        let hk = self.r[k + 1] - self.r[k];
        let t = (x - self.r[k]) / hk;
        let (two, three, six) = (T::lit(2.0), T::lit(3.0), T::lit(6.0));
        let t2 = t * t;
        let d00 = (six * t2 - six * t) / hk;
        let d10 = three * t2 - T::lit(4.0) * t + T::one();
        let d01 = (-six * t2 + six * t) / hk;
        let d11 = three * t2 - two * t;
        d00 * self.v[k] + d10 * self.slope[k] + d01 * self.v[k + 1] + d11 * self.slope[k + 1]
    }
}

/// Three-point one-sided end slope with the usual shape-preserving limits.
fn end_slope<T: Real>(h0: T, h1: T, d0: T, d1: T) -> T {
    let two = T::lit(2.0);
    let s = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        T::zero()
    } else if d0.signum() != d1.signum() && s.abs() > (T::lit(3.0) * d0).abs() {
        T::lit(3.0) * d0
    } else {
        s
    }
}
