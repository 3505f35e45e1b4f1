//! The Hurst parameter governing every covariance and kernel in the crate.

use crate::error::{Error, Result};

/// Hurst exponent restricted to `(0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 0.5 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `2H`, the exponent applied to measures in the covariance.
    #[inline]
    pub fn twice(self) -> f64 {
        2.0 * self.0
    }

    /// Brownian case, where the moving-average kernel degenerates.
    #[inline]
    pub fn is_half(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}
