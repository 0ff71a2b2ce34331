//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`]. An interval set is accepted once the summed
/// error estimate is below `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance {
            abs_tol: T::lit(1e-10).max(T::epsilon() * T::lit(1e3)),
            rel_tol: T::lit(1e-12).max(T::epsilon() * T::lit(1e2)),
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<T> {
    lo: T,
    hi: T,
    value: T,
    err: T,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, lo: T, hi: T) -> Result<Panel<T>> {
    let half = (hi - lo) / T::lit(2.0);
    let mid = (hi + lo) / T::lit(2.0);
    let mut eval = |x: T| -> Result<T> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand(x.as_f64()))
        }
    };
    let fc = eval(mid)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = eval(mid - dx)? + eval(mid + dx)?;
        kronrod = kronrod + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    Ok(Panel {
        lo,
        hi,
        value: kronrod * half,
        err: ((kronrod - gauss) * half).abs(),
    })
}

/// `∫_lo^hi f`, bisecting the panel with the largest error estimate until the
/// tolerance is met.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: &Tolerance<T>) -> Result<T> {
    if lo == hi {
        return Ok(T::zero());
    }
    let mut panels = vec![gk15(&mut f, lo, hi)?];
    loop {
        let value: T = panels.iter().map(|p| p.value).sum();
        let err: T = panels.iter().map(|p| p.err).sum();
        if err <= tol.abs_tol.max(tol.rel_tol * value.abs()) {
            return Ok(value);
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let p = panels.swap_remove(worst);
        let mid = (p.lo + p.hi) / T::lit(2.0);
        if !(mid > p.lo && mid < p.hi) {
            return Err(Error::Quadrature { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        panels.push(gk15(&mut f, p.lo, mid)?);
        panels.push(gk15(&mut f, mid, p.hi)?);
    }
}

/// `∫_lo^hi f(r) dr` for `0 < lo < hi`, computed in `s = ln r` so that
/// singular behaviour at the left end is resolved evenly per decade.
pub fn integrate_log<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: &Tolerance<T>) -> Result<T> {
    if !(lo > T::zero()) || !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "log-substituted quadrature requires 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    integrate(
        |s: T| {
            let r = s.exp();
            f(r) * r
        },
        lo.ln(),
        hi.ln(),
        tol,
    )
}
