//! Spatial covariance kernel and the locality parameters of the kernel
//! smoother.
//!
//! Signal strength fields are modeled as once-differentiable random fields, so
//! the smoother uses the Matérn kernel with smoothness 3/2. The
//! [`QueryConfig`] bounds how far reference points may sit from a prediction
//! location before they are ignored, which keeps per-query solve cost bounded
//! and lets uncovered regions fall back to the missing indicator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Parameters of the Matérn-3/2 kernel smoother.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// Length scale of the field in meters; controls how quickly correlation
    /// decays with distance.
    pub length_scale_m: f64,
    /// Marginal variance of the kernel; the value of the kernel at distance 0.
    pub amplitude: f64,
    /// Ridge regularization added to the system diagonal. 0 performs exact
    /// interpolation and requires distinct reference locations.
    pub regularization: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            length_scale_m: 1.0,
            amplitude: 1.0,
            regularization: 1.0,
        }
    }
}

impl KernelParams {
    /// Checks the parameters for finiteness and positivity.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when a parameter is out of range.
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale_m.is_finite() && self.length_scale_m > 0.0) {
            return Err(Error::invalid("kernel length scale must be finite and > 0"));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid("kernel amplitude must be finite and > 0"));
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return Err(Error::invalid("kernel regularization must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Matérn kernel with smoothness 3/2 as a function of distance in meters:
/// `amplitude * (1 + sqrt(3) d / l) * exp(-sqrt(3) d / l)`.
///
/// Strictly positive, strictly decreasing in distance, and equal to the
/// amplitude at distance 0.
#[must_use]
pub fn matern32(distance_m: f64, params: &KernelParams) -> f64 {
    debug_assert!(distance_m >= 0.0, "distances are non-negative");
    let scaled = SQRT_3 * distance_m / params.length_scale_m;
    params.amplitude * (1.0 + scaled) * (-scaled).exp()
}

/// Locality of query-time smoothing: reference points beyond
/// `scale * length_scale_m` of the prediction location are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    /// Radius expressed as a multiple of the kernel length scale.
    pub scale: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig { scale: 5.0 }
    }
}

impl QueryConfig {
    /// Query radius in meters for the given kernel.
    #[must_use]
    pub fn radius_m(&self, kernel: &KernelParams) -> f64 {
        self.scale * kernel.length_scale_m
    }

    /// Checks the scale for finiteness and positivity.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when the scale is out of range.
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid("query radius scale must be finite and > 0"));
        }
        Ok(())
    }
}
