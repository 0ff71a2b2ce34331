use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which radial profile to build, with its parameters.
///
/// Serializes as a flat table keyed by `variant`, e.g.
/// `{ variant = "log_modified", c = 1.5 }` or
/// `{ variant = "power_gap", D = 1.0, gamma = 2.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelBlock", into = "KernelBlock")]
pub enum KernelSpec {
    /// `exp(-r)`
    Laplacian,
    /// `2 (1 + r) exp(-r)`
    C1Bessel,
    /// `exp(-r^2)`
    Gaussian,
    /// `1 - r^2 (1 - ln r)^c` on `[0, 1/2]`, `c` in `(1, 2]`.
    LogModified { c: f64 },
    /// `1 - D r^gamma` near the origin.
    PowerGap { d: f64, gamma: f64 },
    /// Monotone cubic interpolation through `(r, value)` samples; must include `r = 0`.
    Tabulated { samples: Vec<(f64, f64)> },
}

/// Flat on-disk form of a [`KernelSpec`]; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<(f64, f64)>>,
}

impl KernelSpec {
    pub fn variant_name(&self) -> &'static str {
        match self {
            KernelSpec::Laplacian => "laplacian",
            KernelSpec::C1Bessel => "c1_bessel",
            KernelSpec::Gaussian => "gaussian",
            KernelSpec::LogModified { .. } => "log_modified",
            KernelSpec::PowerGap { .. } => "power_gap",
            KernelSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Parameterless variants by name.
    pub fn from_name(name: &str) -> Result<Self> {
        KernelBlock {
            variant: name.to_string(),
            ..Default::default()
        }
        .try_into()
    }

    /// Checks declared parameter ranges without building the kernel.
    pub fn check(&self) -> Result<()> {
        match self {
            KernelSpec::LogModified { c } if !(*c > 1.0 && *c <= 2.0) => Err(Error::KernelParameter(
                format!("log_modified requires c in (1, 2], got {c}"),
            )),
            KernelSpec::PowerGap { d, gamma } if !(*d > 0.0 && d.is_finite()) => Err(
                Error::KernelParameter(format!("power_gap requires D > 0, got {d} (gamma {gamma})")),
            ),
            KernelSpec::PowerGap { gamma, .. } if !(*gamma > 0.0 && gamma.is_finite()) => Err(
                Error::KernelParameter(format!("power_gap requires gamma > 0, got {gamma}")),
            ),
            KernelSpec::Tabulated { samples } => super::tabulated::check_samples(samples),
            _ => Ok(()),
        }
    }
}

impl TryFrom<KernelBlock> for KernelSpec {
    type Error = Error;

    fn try_from(b: KernelBlock) -> Result<Self> {
        let allowed: &[&str] = match b.variant.as_str() {
            "laplacian" | "c1_bessel" | "gaussian" => &[],
            "log_modified" => &["c"],
            "power_gap" => &["D", "gamma"],
            "tabulated" => &["samples"],
            other => {
                return Err(Error::KernelParameter(format!(
                    "unknown kernel variant `{other}` (expected laplacian, c1_bessel, gaussian, \
                     log_modified, power_gap or tabulated)"
                )))
            }
        };
        let present = [
            ("c", b.c.is_some()),
            ("D", b.d.is_some()),
            ("gamma", b.gamma.is_some()),
            ("samples", b.samples.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(Error::KernelParameter(format!(
                    "key `{key}` is not valid for variant `{}`",
                    b.variant
                )));
            }
        }
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::KernelParameter(format!("variant `{}` requires `{key}`", b.variant)))
        };
        let spec = match b.variant.as_str() {
            "laplacian" => KernelSpec::Laplacian,
            "c1_bessel" => KernelSpec::C1Bessel,
            "gaussian" => KernelSpec::Gaussian,
            "log_modified" => KernelSpec::LogModified { c: need(b.c, "c")? },
            "power_gap" => KernelSpec::PowerGap {
                d: need(b.d, "D")?,
                gamma: need(b.gamma, "gamma")?,
            },
            _ => KernelSpec::Tabulated {
                samples: b.samples.clone().ok_or_else(|| {
                    Error::KernelParameter("variant `tabulated` requires `samples`".into())
                })?,
            },
        };
        spec.check()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for KernelBlock {
    fn from(s: KernelSpec) -> Self {
        let variant = s.variant_name().to_string();
        match s {
            KernelSpec::LogModified { c } => KernelBlock { variant, c: Some(c), ..Default::default() },
            KernelSpec::PowerGap { d, gamma } => KernelBlock {
                variant,
                d: Some(d),
                gamma: Some(gamma),
                ..Default::default()
            },
            KernelSpec::Tabulated { samples } => KernelBlock {
                variant,
                samples: Some(samples),
                ..Default::default()
            },
            _ => KernelBlock { variant, ..Default::default() },
        }
    }
}
