//! Structural input encoding: input datum and weights to load reflections.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WpnnError};
use crate::linalg::{C64, ZERO};
use crate::scattering::LoadVector;

/// Slack on the input domain `[0, 1]`.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    /// `r_i = exp(j 2 pi (x + w_i))`
    Phase,
    /// `r_i = x * clip(w_i, 0, 1)`
    Linear,
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Phase => "phase",
            EncodingKind::Linear => "linear",
        })
    }
}

impl FromStr for EncodingKind {
    type Err = WpnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" => Ok(EncodingKind::Phase),
            "linear" => Ok(EncodingKind::Linear),
            other => Err(WpnnError::Config(format!("unknown encoding {other:?} (expected \"phase\" or \"linear\")"))),
        }
    }
}

/// Real control variables applied to the tunable loads.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector(pub Vec<f64>);

#[inline]
pub fn clip_unit(w: f64) -> f64 {
    w.clamp(0.0, 1.0)
}

pub fn check_domain(x: f64) -> Result<()> {
    if !(x >= -DOMAIN_SLACK && x <= 1.0 + DOMAIN_SLACK) {
        return Err(WpnnError::DomainError(x));
    }
    Ok(())
}

impl EncodingKind {
    /// Control variable `q(x, w)`.
    pub fn control(self, x: f64, w: f64) -> f64 {
        match self {
            EncodingKind::Phase => x + w,
            EncodingKind::Linear => x * clip_unit(w),
        }
    }

    pub fn controls(self, x: f64, weights: &[f64]) -> ControlVector {
        ControlVector(weights.iter().map(|&w| self.control(x, w)).collect())
    }

    /// Reflection coefficient `c(q(x, w))` without domain checks.
    #[inline]
    pub fn reflection(self, x: f64, w: f64) -> C64 {
        match self {
            EncodingKind::Phase => C64::from_polar(1.0, TAU * (x + w)),
            EncodingKind::Linear => C64::new(x * clip_unit(w), 0.0),
        }
    }

    /// `dr/dw` at `(x, w)`; zero in and on the boundary of the clipped
    /// region for linear encoding.
    #[inline]
    pub fn derivative(self, x: f64, w: f64) -> C64 {
        match self {
            EncodingKind::Phase => C64::new(0.0, TAU) * self.reflection(x, w),
            EncodingKind::Linear => {
                if w > 0.0 && w < 1.0 {
                    C64::new(x, 0.0)
                } else {
                    ZERO
                }
            }
        }
    }

    /// Scalar factor `s(x)` with `Phi(x, w) = s(x) D(w)`.
    pub fn input_factor(self, x: f64) -> C64 {
        match self {
            EncodingKind::Phase => C64::from_polar(1.0, TAU * x),
            EncodingKind::Linear => C64::new(x, 0.0),
        }
    }

    /// Input-independent diagonal `D(w)`: `exp(j 2 pi w_i)` or `clip(w_i)`.
    pub fn weight_factor(self, w: f64) -> C64 {
        match self {
            EncodingKind::Phase => C64::from_polar(1.0, TAU * w),
            EncodingKind::Linear => C64::new(clip_unit(w), 0.0),
        }
    }
}

/// Load vector for datum `x` and one weight vector.
pub fn encode(kind: EncodingKind, x: f64, weights: &[f64]) -> Result<LoadVector> {
    check_domain(x)?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(WpnnError::Config("non-finite weight".into()));
    }
    LoadVector::new(weights.iter().map(|&w| kind.reflection(x, w)).collect())
}

/// Elementwise derivatives `dr_i/dw_i`.
pub fn encode_jacobian(kind: EncodingKind, x: f64, weights: &[f64]) -> Result<Vec<C64>> {
    check_domain(x)?;
    Ok(weights.iter().map(|&w| kind.derivative(x, w)).collect())
}
