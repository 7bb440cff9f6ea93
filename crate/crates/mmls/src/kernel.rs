//! Radial weight functions applied to ambient distances.
//!
//! The default family is a smooth, compactly supported bump
//! `exp(-t^2 / (t - k*h)^2)` on `[0, k*h)`; a Gaussian `exp(-t^2/h^2)` and a
//! regularized singular family `1/(t^2 + eps)` (used for interpolation) are
//! also provided. All families are monotonically non-increasing in `t`.

use crate::error::{MmlsError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightFamily {
    /// `exp(-t^2/(t - k*h)^2)` for `t < k*h`, zero beyond. C-infinity,
    /// compact support.
    TruncatedExp,
    /// `exp(-t^2/h^2)`. Unbounded support, fast decay.
    Gaussian,
    /// `1/(t^2 + eps_reg)` truncated at `k*h`. Finite stand-in for a weight
    /// that blows up at zero distance; `1/theta = t^2 + eps_reg` is the
    /// quantity that enters the dual system, and it stays smooth.
    InterpolatorySingular,
}

impl WeightFamily {
    pub fn name(&self) -> &'static str {
        match self {
            WeightFamily::TruncatedExp => "truncated-exp",
            WeightFamily::Gaussian => "gaussian",
            WeightFamily::InterpolatorySingular => "interpolatory",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "truncated-exp" | "truncated_exp" | "texp" => Ok(WeightFamily::TruncatedExp),
            "gaussian" => Ok(WeightFamily::Gaussian),
            "interpolatory" | "singular" => Ok(WeightFamily::InterpolatorySingular),
            other => Err(MmlsError::Config(format!(
                "unknown weight family '{other}' (expected truncated-exp, gaussian or interpolatory)"
            ))),
        }
    }
}

/// A fully resolved radial weight: family plus support multiplier `k`,
/// bandwidth `h` and the singular-family regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    /// Support multiplier; the compact families vanish at `t >= k*h`.
    pub k: f64,
    /// Bandwidth in ambient-distance units.
    pub h: f64,
    /// Regularizer for the singular family, in squared-distance units.
    pub eps_reg: f64,
}

impl WeightSpec {
    pub fn new(family: WeightFamily, k: f64, h: f64) -> Result<Self> {
        let spec = WeightSpec {
            family,
            k,
            h,
            eps_reg: default_eps_reg(h),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn truncated_exp(k: f64, h: f64) -> Result<Self> {
        Self::new(WeightFamily::TruncatedExp, k, h)
    }

    pub fn gaussian(h: f64) -> Result<Self> {
        Self::new(WeightFamily::Gaussian, 1.0, h)
    }

    pub fn interpolatory(k: f64, h: f64) -> Result<Self> {
        Self::new(WeightFamily::InterpolatorySingular, k, h)
    }

    pub fn with_eps_reg(mut self, eps_reg: f64) -> Result<Self> {
        self.eps_reg = eps_reg;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(MmlsError::Config(format!(
                "weight support multiplier k must be positive and finite, got {}",
                self.k
            )));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(MmlsError::Config(format!(
                "weight bandwidth h must be positive and finite, got {}",
                self.h
            )));
        }
        if !(self.eps_reg > 0.0) || !self.eps_reg.is_finite() {
            return Err(MmlsError::Config(format!(
                "weight regularizer eps_reg must be positive and finite, got {}",
                self.eps_reg
            )));
        }
        Ok(())
    }

    /// Radius beyond which the weight is exactly zero (infinite for the
    /// Gaussian family).
    pub fn support_radius(&self) -> f64 {
        match self.family {
            WeightFamily::TruncatedExp | WeightFamily::InterpolatorySingular => self.k * self.h,
            WeightFamily::Gaussian => f64::INFINITY,
        }
    }

    /// Evaluate the weight at distance `t >= 0`.
    ///
    /// Near the support edge the truncated-exponential underflows to zero a
    /// little inside `k*h`; the zero set never extends below `t < k*h` by
    /// more than f64 underflow allows.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "weight evaluated at negative distance {t}");
        match self.family {
            WeightFamily::TruncatedExp => {
                let s = self.k * self.h;
                if t >= s {
                    0.0
                } else {
                    let gap = t - s;
                    (-(t * t) / (gap * gap)).exp()
                }
            }
            WeightFamily::Gaussian => (-(t * t) / (self.h * self.h)).exp(),
            WeightFamily::InterpolatorySingular => {
                let s = self.k * self.h;
                if t >= s {
                    0.0
                } else {
                    1.0 / (t * t + self.eps_reg)
                }
            }
        }
    }

    /// The reciprocal weight `1/theta(t)`, as it appears in the diagonal of
    /// the dual system. For the singular family this is `t^2 + eps_reg`,
    /// finite and smooth even at `t = 0`.
    pub fn inv_eval(&self, t: f64) -> f64 {
        match self.family {
            WeightFamily::InterpolatorySingular => {
                let s = self.k * self.h;
                if t >= s {
                    f64::INFINITY
                } else {
                    t * t + self.eps_reg
                }
            }
            _ => {
                let w = self.eval(t);
                if w > 0.0 {
                    1.0 / w
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Default regularizer for the singular family: `(1e-8 * h)^2`.
pub fn default_eps_reg(h: f64) -> f64 {
    let e = 1e-8 * h;
    e * e
}

/// Free-function form of [`WeightSpec::eval`].
pub fn weight_eval(t: f64, spec: &WeightSpec) -> f64 {
    spec.eval(t)
}
