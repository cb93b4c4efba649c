//! Per-feature marginal pipeline: rotate, approximate the held-out
//! predictive, combine analytically.
//!
//! For each column j the response is rotated so that the coordinate
//! carrying x_j separates from the rest; a backend then supplies the
//! posterior predictive of that coordinate from the reduced problem, and
//! the closed-form combination step turns it into the marginal inclusion
//! probability and slab moments. Features are independent given the
//! backend output, so they are processed in parallel; results are
//! returned in column order and do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{amp_predictive, amp_run, em_tune, AmpConfig};
use crate::bcr::{bcr_predictive, BcrConfig};
use crate::combine::{
    combine_marginal, combine_marginal_mixture, GaussianPredictive, MarginalResult,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{exact_rotated_predictive, ENUMERATION_CAP};
use crate::prior::SpikeSlabPrior;
use crate::rotation::rotate_for_index;

/// Strategy used to approximate the rotated posterior predictive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum Backend {
    /// Randomized compression with a mixture over projection draws.
    Bcr(BcrConfig),
    /// Message passing on the reduced design.
    Amp(AmpConfig),
    /// Enumeration of the reduced-model posterior, kept as a full mixture
    /// through the combination step. Exact; feasible only for small p.
    ExactMixture,
    /// Enumeration followed by a single-Gaussian moment-matched summary;
    /// isolates the error of collapsing the mixture.
    ExactMomentMatched,
}

impl Backend {
    /// Short stable name used in output files.
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Bcr(_) => "bcr",
            Backend::Amp(_) => "amp",
            Backend::ExactMixture => "exact_mixture",
            Backend::ExactMomentMatched => "exact_moment_matched",
        }
    }

    fn needs_enumeration(&self) -> bool {
        matches!(self, Backend::ExactMixture | Backend::ExactMomentMatched)
    }
}

/// Options governing the whole-dataset marginal computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalOptions {
    /// Permit running on a dataset that has not been standardized.
    /// Column scalings then feed directly into the slab variance, which
    /// is rarely intended, so this is off by default.
    pub allow_unstandardized: bool,
}

/// Compute the marginal inclusion probability and slab moments for every
/// column of the dataset.
///
/// Errors that concern the whole problem (invalid prior, unstandardized
/// data without the override, enumeration beyond the cap) are returned;
/// a failure confined to a single column (e.g. a backend that diverges
/// on one reduced problem) yields the prior as that column's result with
/// `converged = false` rather than aborting the rest.
pub fn approximate_all_marginals(
    dataset: &Dataset,
    prior: &SpikeSlabPrior,
    backend: &Backend,
    options: &MarginalOptions,
) -> Result<Vec<MarginalResult>> {
    SpikeSlabPrior::new(prior.lambda, prior.psi, prior.sigma2)?;
    if !dataset.standardized && !options.allow_unstandardized {
        return Err(Error::NotStandardized);
    }
    let p = dataset.p();
    if p == 0 {
        return Ok(Vec::new());
    }
    if backend.needs_enumeration() && p.saturating_sub(1) > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            p: p - 1,
            cap: ENUMERATION_CAP,
        });
    }

    // Hyperparameter tuning is global: one pass on the full problem, then
    // every per-column run reuses the tuned values.
    let (prior_eff, backend_eff) = match backend {
        Backend::Amp(cfg) if cfg.tune_hyperparams => {
            let (tuned, _) = em_tune(dataset.y.view(), dataset.x.view(), prior, cfg)?;
            let inner = AmpConfig {
                tune_hyperparams: false,
                ..*cfg
            };
            (tuned, Backend::Amp(inner))
        }
        other => (*prior, other.clone()),
    };

    let results: Vec<MarginalResult> = (0..p)
        .into_par_iter()
        .map(|j| {
            marginal_for_index(dataset, &prior_eff, &backend_eff, j)
                .unwrap_or_else(|_| prior_fallback(j, &prior_eff))
        })
        .collect();
    Ok(results)
}

/// Result reported for a column whose reduced problem could not be
/// solved: the prior, flagged as not converged.
fn prior_fallback(index_j: usize, prior: &SpikeSlabPrior) -> MarginalResult {
    MarginalResult {
        index_j,
        inclusion_prob: prior.lambda,
        slab_mean: 0.0,
        slab_var: prior.psi,
        converged: false,
    }
}

fn marginal_for_index(
    dataset: &Dataset,
    prior: &SpikeSlabPrior,
    backend: &Backend,
    j: usize,
) -> Result<MarginalResult> {
    let seed = match backend {
        Backend::Bcr(cfg) => cfg.seed,
        Backend::Amp(cfg) => cfg.seed,
        _ => 0,
    };
    let rot = rotate_for_index(dataset, j, seed)?;
    match backend {
        Backend::Bcr(cfg) => {
            let pred = bcr_predictive(
                rot.y_tilde.view(),
                rot.x_tilde.view(),
                rot.x_tilde_new.view(),
                cfg,
                prior,
            )?;
            combine_marginal(j, rot.a, rot.z, &pred, prior)
        }
        Backend::Amp(cfg) => {
            if rot.p_reduced() == 0 {
                // Nothing to regress on: the held-out coordinate is pure
                // noise under the reduced model.
                let pred = GaussianPredictive::new(0.0, prior.sigma2)?;
                return combine_marginal(j, rot.a, rot.z, &pred, prior);
            }
            let state = amp_run(rot.y_tilde.view(), rot.x_tilde.view(), prior, cfg)?;
            let pred = amp_predictive(&state, rot.x_tilde_new.view(), prior.sigma2)?;
            let mut result = combine_marginal(j, rot.a, rot.z, &pred, prior)?;
            result.converged = state.converged;
            Ok(result)
        }
        Backend::ExactMixture => {
            let mix = exact_rotated_predictive(&rot, prior)?;
            combine_marginal_mixture(j, rot.a, rot.z, &mix, prior)
        }
        Backend::ExactMomentMatched => {
            let mix = exact_rotated_predictive(&rot, prior)?;
            let pred = mix.moment_matched();
            combine_marginal(j, rot.a, rot.z, &pred, prior)
        }
    }
}
