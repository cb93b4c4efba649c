//! Python bindings for the spikeslab crate: dataset fitting with any
//! backend, exact enumeration, and the scalar denoise/combine kernels.

use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spikeslab::amp::{spike_slab_denoise, AmpConfig};
use spikeslab::bcr::BcrConfig;
use spikeslab::combine::{combine_marginal, GaussianPredictive};
use spikeslab::data::Dataset;
use spikeslab::oracle::exact_inclusion_probs;
use spikeslab::pipeline::{approximate_all_marginals, Backend, MarginalOptions};
use spikeslab::prior::SpikeSlabPrior;
use spikeslab::sim::bcr_tuned_marginals;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Per-feature marginal: inclusion probability plus slab-conditional
/// moments.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Marginal {
    #[pyo3(get)]
    index: usize,
    #[pyo3(get)]
    inclusion_prob: f64,
    #[pyo3(get)]
    slab_mean: f64,
    #[pyo3(get)]
    slab_var: f64,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl Marginal {
    fn __repr__(&self) -> String {
        format!(
            "Marginal(index={}, inclusion_prob={:.6}, slab_mean={:.6}, slab_var={:.6}, converged={})",
            self.index, self.inclusion_prob, self.slab_mean, self.slab_var, self.converged
        )
    }
}

impl From<&spikeslab::combine::MarginalResult> for Marginal {
    fn from(r: &spikeslab::combine::MarginalResult) -> Self {
        Marginal {
            index: r.index_j,
            inclusion_prob: r.inclusion_prob,
            slab_mean: r.slab_mean,
            slab_var: r.slab_var,
            converged: r.converged,
        }
    }
}

fn build_dataset(y: Vec<f64>, x: Vec<Vec<f64>>, standardize: bool) -> PyResult<Dataset> {
    let n = x.len();
    if n == 0 {
        return Err(value_err("the design matrix has no rows"));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(value_err("all design matrix rows must have equal length"));
    }
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let x = Array2::from_shape_vec((n, p), flat).map_err(value_err)?;
    let data = Dataset::new(Array1::from_vec(y), x).map_err(value_err)?;
    if standardize {
        data.standardize().map_err(value_err)
    } else {
        Ok(data)
    }
}

/// Approximate (or exactly enumerate) all marginal inclusion
/// probabilities for a dataset.
///
/// `backend` is one of "bcr", "amp", "exact_mixture",
/// "exact_moment_matched". `config` is an optional JSON object with
/// backend-specific settings (same schema as the simulation configs).
/// With `tune=True` the amp backend re-estimates (lambda, sigma2) by EM
/// and the bcr backend marginalizes sigma2 and refits lambda iteratively.
#[pyfunction]
#[pyo3(signature = (y, x, lam=0.1, psi=1.0, sigma2=1.0, backend="bcr", seed=0, tune=false, config=None, standardize=true))]
#[allow(clippy::too_many_arguments)]
fn fit_marginals(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    lam: f64,
    psi: f64,
    sigma2: f64,
    backend: &str,
    seed: u64,
    tune: bool,
    config: Option<&str>,
    standardize: bool,
) -> PyResult<Vec<Marginal>> {
    let data = build_dataset(y, x, standardize)?;
    let prior = SpikeSlabPrior::new(lam, psi, sigma2).map_err(value_err)?;
    let options = MarginalOptions {
        allow_unstandardized: !standardize,
    };

    let backend = match backend {
        "bcr" => {
            let mut cfg: BcrConfig = match config {
                Some(text) => serde_json::from_str(text).map_err(value_err)?,
                None => BcrConfig::default(),
            };
            cfg.seed = seed;
            if tune {
                cfg.marginalize_sigma2 = true;
            }
            Backend::Bcr(cfg)
        }
        "amp" => {
            let mut cfg: AmpConfig = match config {
                Some(text) => serde_json::from_str(text).map_err(value_err)?,
                None => AmpConfig::default(),
            };
            cfg.seed = seed;
            if tune {
                cfg.tune_hyperparams = true;
            }
            Backend::Amp(cfg)
        }
        "exact_mixture" => Backend::ExactMixture,
        "exact_moment_matched" => Backend::ExactMomentMatched,
        other => {
            return Err(value_err(format!(
                "unknown backend '{other}'; expected bcr, amp, exact_mixture, \
                 or exact_moment_matched"
            )))
        }
    };

    let results = match (&backend, tune) {
        (Backend::Bcr(cfg), true) => {
            bcr_tuned_marginals(&data, prior.psi, prior.lambda, cfg, &options)
        }
        _ => approximate_all_marginals(&data, &prior, &backend, &options),
    }
    .map_err(value_err)?;
    Ok(results.iter().map(Marginal::from).collect())
}

/// Exact inclusion probabilities by full model enumeration (feature
/// count capped at 20).
#[pyfunction]
#[pyo3(signature = (y, x, lam=0.1, psi=1.0, sigma2=1.0, standardize=true))]
fn exact_marginals(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    lam: f64,
    psi: f64,
    sigma2: f64,
    standardize: bool,
) -> PyResult<Vec<f64>> {
    let data = build_dataset(y, x, standardize)?;
    let prior = SpikeSlabPrior::new(lam, psi, sigma2).map_err(value_err)?;
    exact_inclusion_probs(&data, &prior).map_err(value_err)
}

/// Scalar spike-and-slab posterior for one noisy observation
/// r = b + noise with noise variance `s2`: returns
/// (inclusion probability, posterior mean, posterior variance).
#[pyfunction]
fn denoise(r: f64, s2: f64, lam: f64, psi: f64) -> PyResult<(f64, f64, f64)> {
    let prior = SpikeSlabPrior::new(lam, psi, 1.0).map_err(value_err)?;
    let out = spike_slab_denoise(r, s2, &prior).map_err(value_err)?;
    Ok((out.incl, out.mean, out.var))
}

/// Combine a rotated observation z = a * b + w, w ~ N(mu, tau2), with
/// the spike-and-slab prior on b.
#[pyfunction]
#[pyo3(signature = (a, z, mu, tau2, lam=0.1, psi=1.0))]
fn combine(a: f64, z: f64, mu: f64, tau2: f64, lam: f64, psi: f64) -> PyResult<Marginal> {
    let prior = SpikeSlabPrior::new(lam, psi, 1.0).map_err(value_err)?;
    let predictive = GaussianPredictive::new(mu, tau2).map_err(value_err)?;
    let result = combine_marginal(0, a, z, &predictive, &prior).map_err(value_err)?;
    Ok(Marginal::from(&result))
}

#[pymodule]
fn spikeslab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Marginal>()?;
    m.add_function(wrap_pyfunction!(fit_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(exact_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    Ok(())
}
