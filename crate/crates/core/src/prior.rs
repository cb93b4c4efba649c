//! The spike-and-slab prior and its hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the iid spike-and-slab prior
/// `beta_j ~ (1 - lambda) * delta_0 + lambda * N(0, psi)`,
/// together with the error variance `sigma2` of the Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabPrior {
    /// Prior inclusion probability, strictly inside (0, 1).
    pub lambda: f64,
    /// Slab variance, positive.
    pub psi: f64,
    /// Error variance, positive.
    pub sigma2: f64,
}

impl SpikeSlabPrior {
    /// Validated constructor. Fields stay public so tests can probe
    /// boundary behaviours (e.g. the psi -> 0 limit) directly.
    pub fn new(lambda: f64, psi: f64, sigma2: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie strictly in (0,1), got {lambda}"
            )));
        }
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "psi must be positive and finite, got {psi}"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self {
            lambda,
            psi,
            sigma2,
        })
    }
}
