//! Analytic combination of a Gaussian (or Gaussian-mixture) predictive with
//! the spike-and-slab prior on the isolated coefficient.
//!
//! After rotation, the scalar observation `z` satisfies
//! `z | beta_j, mu ~ N(mu + a beta_j, 0)` conditionally on the nuisance fit,
//! and integrating the nuisance posterior yields `z | beta_j ~ N(mu + a
//! beta_j, tau2)` when the predictive for the held-out projection is
//! `N(mu, tau2)`. The two-point prior on `beta_j` then gives closed-form
//! posterior inclusion odds and slab moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_normal_pdf, log_sum_exp};
use crate::prior::SpikeSlabPrior;

/// A Gaussian predictive distribution for the held-out projection q1'y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPredictive {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianPredictive {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::NonFinite(format!(
                "predictive moments must be finite, got mean={mean}, variance={variance}"
            )));
        }
        if variance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "predictive variance must be positive, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }
}

/// A finite Gaussian mixture predictive, stored with normalized log weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    /// Normalized log weights (logsumexp == 0).
    pub log_weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(log_weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = log_weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "mixture component counts disagree: {} weights, {} means, {} variances",
                k,
                means.len(),
                variances.len()
            )));
        }
        for (i, &v) in variances.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "mixture variance {i} must be positive and finite, got {v}"
                )));
            }
        }
        for (i, &m) in means.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("mixture mean {i} is not finite")));
            }
        }
        let total = log_sum_exp(&log_weights);
        if !total.is_finite() {
            return Err(Error::NonFinite(
                "mixture weights do not normalize to a finite total".into(),
            ));
        }
        let log_weights = log_weights.iter().map(|&w| w - total).collect();
        Ok(Self {
            log_weights,
            means,
            variances,
        })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Collapse to a single Gaussian matching the mixture mean and variance.
    pub fn moment_matched(&self) -> GaussianPredictive {
        let mut mean = 0.0;
        for k in 0..self.len() {
            mean += self.log_weights[k].exp() * self.means[k];
        }
        let mut var = 0.0;
        for k in 0..self.len() {
            let w = self.log_weights[k].exp();
            let d = self.means[k] - mean;
            var += w * (self.variances[k] + d * d);
        }
        GaussianPredictive {
            mean,
            variance: var,
        }
    }
}

/// Posterior summary for a single coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalResult {
    pub index_j: usize,
    /// Posterior probability that the coefficient is nonzero.
    pub inclusion_prob: f64,
    /// Posterior mean of the coefficient given inclusion.
    pub slab_mean: f64,
    /// Posterior variance of the coefficient given inclusion.
    pub slab_var: f64,
    /// Whether the backend that produced the predictive reported convergence.
    pub converged: bool,
}

impl MarginalResult {
    /// Unconditional posterior mean `inclusion_prob * slab_mean`.
    pub fn posterior_mean(&self) -> f64 {
        self.inclusion_prob * self.slab_mean
    }
}

/// Combine a single Gaussian predictive with the prior for coefficient `j`.
///
/// `a` is the norm of the isolated column and `z` the observed projection.
/// With predictive `N(mu, tau2)` the marginal likelihood of `z` is
/// `N(mu, tau2)` under the spike and `N(mu, a^2 psi + tau2)` under the slab;
/// the slab-conditional posterior for the coefficient is Gaussian with
/// mean `a psi (z - mu) / (a^2 psi + tau2)` and variance
/// `psi tau2 / (a^2 psi + tau2)`.
pub fn combine_marginal(
    index_j: usize,
    a: f64,
    z: f64,
    predictive: &GaussianPredictive,
    prior: &SpikeSlabPrior,
) -> Result<MarginalResult> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "column norm must be positive and finite, got {a}"
        )));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("projection z is not finite".into()));
    }
    let mu = predictive.mean;
    let tau2 = predictive.variance;
    if !(tau2 > 0.0) || !tau2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "predictive variance must be positive and finite, got {tau2}"
        )));
    }
    let psi = prior.psi;
    if psi == 0.0 {
        // Degenerate slab: spike and slab coincide, so the data cannot move
        // the prior odds and the coefficient is pinned at zero.
        return Ok(MarginalResult {
            index_j,
            inclusion_prob: prior.lambda,
            slab_mean: 0.0,
            slab_var: 0.0,
            converged: true,
        });
    }
    let slab_var_z = a * a * psi + tau2;
    let log_spike = (1.0 - prior.lambda).ln() + ln_normal_pdf(z, mu, tau2);
    let log_slab = prior.lambda.ln() + ln_normal_pdf(z, mu, slab_var_z);
    let log_denom = log_sum_exp(&[log_spike, log_slab]);
    let inclusion_prob = (log_slab - log_denom).exp();
    let slab_mean = a * psi * (z - mu) / slab_var_z;
    let slab_var = psi * tau2 / slab_var_z;
    Ok(MarginalResult {
        index_j,
        inclusion_prob,
        slab_mean,
        slab_var,
        converged: true,
    })
}

/// Combine a Gaussian-mixture predictive with the prior for coefficient `j`.
///
/// The combination distributes over components: each contributes spike and
/// slab evidence terms, and slab moments are averaged under the
/// slab-posterior component weights. This is exact (no moment matching of
/// the predictive itself).
pub fn combine_marginal_mixture(
    index_j: usize,
    a: f64,
    z: f64,
    predictive: &GaussianMixture,
    prior: &SpikeSlabPrior,
) -> Result<MarginalResult> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "column norm must be positive and finite, got {a}"
        )));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("projection z is not finite".into()));
    }
    let psi = prior.psi;
    if psi == 0.0 {
        return Ok(MarginalResult {
            index_j,
            inclusion_prob: prior.lambda,
            slab_mean: 0.0,
            slab_var: 0.0,
            converged: true,
        });
    }
    let kk = predictive.len();
    let mut log_spike_terms = Vec::with_capacity(kk);
    let mut log_slab_terms = Vec::with_capacity(kk);
    for k in 0..kk {
        let mu = predictive.means[k];
        let tau2 = predictive.variances[k];
        let lw = predictive.log_weights[k];
        log_spike_terms.push(lw + ln_normal_pdf(z, mu, tau2));
        log_slab_terms.push(lw + ln_normal_pdf(z, mu, a * a * psi + tau2));
    }
    let log_spike = (1.0 - prior.lambda).ln() + log_sum_exp(&log_spike_terms);
    let log_slab_total = log_sum_exp(&log_slab_terms);
    let log_slab = prior.lambda.ln() + log_slab_total;
    let log_denom = log_sum_exp(&[log_spike, log_slab]);
    let inclusion_prob = (log_slab - log_denom).exp();

    // Slab-conditional moments: reweight components by their slab evidence,
    // then mix the per-component conditional Gaussians for the coefficient.
    let mut slab_mean = 0.0;
    let mut slab_second = 0.0;
    for k in 0..kk {
        let w = (log_slab_terms[k] - log_slab_total).exp();
        let mu = predictive.means[k];
        let tau2 = predictive.variances[k];
        let denom = a * a * psi + tau2;
        let comp_mean = a * psi * (z - mu) / denom;
        let comp_var = psi * tau2 / denom;
        slab_mean += w * comp_mean;
        slab_second += w * (comp_var + comp_mean * comp_mean);
    }
    let slab_var = (slab_second - slab_mean * slab_mean).max(0.0);
    Ok(MarginalResult {
        index_j,
        inclusion_prob,
        slab_mean,
        slab_var,
        converged: true,
    })
}
