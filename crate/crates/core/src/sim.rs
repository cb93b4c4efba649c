//! Simulation studies: correlated designs, calibrated noise, and the two
//! benchmark protocols (accuracy-versus-correlation curves against the
//! enumeration reference, and box-plot summaries under tuned
//! hyperparameters).
//!
//! Replicates are independent jobs, each with an RNG substream derived
//! from the study seed and the replicate coordinates, so parallel and
//! serial execution produce identical results.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::AmpConfig;
use crate::bcr::BcrConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::quantile_sorted;
use crate::oracle::{exact_inclusion_probs, ENUMERATION_CAP};
use crate::pipeline::{approximate_all_marginals, Backend, MarginalOptions};
use crate::prior::SpikeSlabPrior;
use crate::rng::{labels, substream};

/// Which benchmark protocol a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Known hyperparameters; per-replicate mean squared error of the
    /// approximate inclusion probabilities against enumeration, swept
    /// over the design correlation grid.
    MseCurve,
    /// Unknown hyperparameters (tuned per dataset); per-feature inclusion
    /// probability samples summarized as box statistics over a grid of
    /// (correlation, signal-to-noise) cells.
    Boxplot,
}

/// One (correlation, signal-to-noise) grid cell of a box-plot study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub rho: f64,
    pub snr: f64,
}

fn default_psi_rule() -> f64 {
    10.0
}

fn default_snr() -> f64 {
    1.0
}

/// Full description of a simulation study. Unknown keys in a config file
/// are rejected during deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub study: StudyKind,
    pub n: usize,
    pub p: usize,
    pub beta_true: Vec<f64>,
    /// Correlation grid for the curve study.
    #[serde(default)]
    pub rho_grid: Vec<f64>,
    /// Signal-to-noise ratio for the curve study (cells carry their own).
    #[serde(default = "default_snr")]
    pub snr: f64,
    pub replicates: usize,
    /// Slab variance as a multiple of the noise variance.
    #[serde(default = "default_psi_rule")]
    pub psi_rule: f64,
    /// Prior inclusion probability; defaults to the true nonzero fraction.
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub bcr: BcrConfig,
    #[serde(default)]
    pub amp: AmpConfig,
    pub seed: u64,
    /// Grid for the box-plot study; `DEFAULT_BOX_CELLS` is used if absent.
    #[serde(default)]
    pub cells: Option<Vec<Cell>>,
    /// Standardize each generated dataset before fitting.
    #[serde(default)]
    pub standardize: bool,
}

/// Default (correlation, signal-to-noise) grid of the box-plot study.
pub const DEFAULT_BOX_CELLS: [Cell; 5] = [
    Cell { rho: 0.0, snr: 1.0 },
    Cell { rho: 0.2, snr: 1.0 },
    Cell { rho: 0.5, snr: 10.0 },
    Cell { rho: 0.7, snr: 10.0 },
    Cell { rho: 0.8, snr: 10.0 },
];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidParameter(
                "replicates must be at least 1".into(),
            ));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 observations, got {}",
                self.n
            )));
        }
        if self.p < 1 {
            return Err(Error::InvalidParameter(
                "need at least one feature".into(),
            ));
        }
        if self.beta_true.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "beta_true has {} entries for p = {}",
                self.beta_true.len(),
                self.p
            )));
        }
        if !(self.psi_rule > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "psi_rule must be positive, got {}",
                self.psi_rule
            )));
        }
        for &rho in &self.rho_grid {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!(
                    "design correlation must lie in [0, 1), got {rho}"
                )));
            }
        }
        match self.study {
            StudyKind::MseCurve => {
                if self.rho_grid.is_empty() {
                    return Err(Error::InvalidParameter(
                        "curve study needs a nonempty rho_grid".into(),
                    ));
                }
                if !(self.snr > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "snr must be positive, got {}",
                        self.snr
                    )));
                }
                if self.p > ENUMERATION_CAP {
                    return Err(Error::EnumerationTooLarge {
                        p: self.p,
                        cap: ENUMERATION_CAP,
                    });
                }
            }
            StudyKind::Boxplot => {
                for cell in self.resolved_cells() {
                    if !(0.0..1.0).contains(&cell.rho) {
                        return Err(Error::InvalidParameter(format!(
                            "cell correlation must lie in [0, 1), got {}",
                            cell.rho
                        )));
                    }
                    if !(cell.snr > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "cell snr must be positive, got {}",
                            cell.snr
                        )));
                    }
                }
            }
        }
        let lambda = self.resolved_lambda0();
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "resolved prior inclusion probability must lie in (0, 1), got {lambda}"
            )));
        }
        self.bcr.validate()?;
        self.amp.validate()?;
        Ok(())
    }

    /// Prior inclusion probability: explicit value, or the nonzero
    /// fraction of the true coefficient vector.
    pub fn resolved_lambda0(&self) -> f64 {
        self.lambda0.unwrap_or_else(|| {
            let nnz = self.beta_true.iter().filter(|b| **b != 0.0).count();
            nnz as f64 / self.p as f64
        })
    }

    pub fn resolved_cells(&self) -> Vec<Cell> {
        self.cells
            .clone()
            .unwrap_or_else(|| DEFAULT_BOX_CELLS.to_vec())
    }
}

/// Draw an n x p design whose rows are iid N(0, S) with
/// S[i][j] = rho^|i-j|. The first-order autoregressive structure makes
/// the Cholesky factor a two-term recursion across columns, applied here
/// directly: t_0 = g_0, t_j = rho t_{j-1} + sqrt(1 - rho^2) g_j.
pub fn gen_design<R: Rng>(n: usize, p: usize, rho: f64, rng: &mut R) -> Array2<f64> {
    assert!((0.0..1.0).contains(&rho), "correlation out of [0, 1)");
    let scale = (1.0 - rho * rho).sqrt();
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let g: f64 = rng.sample(StandardNormal);
            let t = if j == 0 { g } else { rho * prev + scale * g };
            x[[i, j]] = t;
            prev = t;
        }
    }
    x
}

/// Population covariance quadratic form b' S b with S[i][j] = rho^|i-j|.
fn population_signal_variance(beta: &[f64], rho: f64) -> f64 {
    let p = beta.len();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            total += beta[i] * beta[j] * rho.powi((i as i32 - j as i32).abs());
        }
    }
    total
}

/// Noise variance that attains the requested signal-to-noise ratio under
/// the population design covariance: sigma2 = (b' S b) / snr.
pub fn calibrate_noise(beta: &[f64], rho: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "snr must be positive and finite, got {snr}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "correlation must lie in [0, 1), got {rho}"
        )));
    }
    let signal = population_signal_variance(beta, rho);
    if signal <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(signal / snr)
}

/// Mean squared error of one replicate for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub rho: f64,
    pub replicate: usize,
    pub method: String,
    pub mse: f64,
}

/// Aggregate over replicates at one correlation level for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub rho: f64,
    pub method: String,
    /// None when every replicate failed.
    pub mean_mse: Option<f64>,
    pub p20: Option<f64>,
    pub p80: Option<f64>,
    pub successes: usize,
    pub failures: usize,
}

/// Inclusion-probability samples for one feature in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSamples {
    pub rho: f64,
    pub snr: f64,
    pub method: String,
    pub feature: usize,
    pub truth_nonzero: bool,
    pub samples: Vec<f64>,
}

/// Five-number box summary (median, quartiles, fences at 1.5 IQR pulled
/// in to the nearest observed sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub rho: f64,
    pub snr: f64,
    pub method: String,
    pub feature: usize,
    pub truth_nonzero: bool,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n: usize,
}

/// Fraction of inclusion probabilities pushed outside [0.05, 0.95] by a
/// method within one grid cell (all features and replicates pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremenessRecord {
    pub rho: f64,
    pub snr: f64,
    pub method: String,
    pub fraction: f64,
}

/// A replicate a method could not complete; recorded, never silently
/// dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub rho: f64,
    pub snr: f64,
    pub method: String,
    pub replicate: usize,
    pub message: String,
}

/// Everything a study produced, serializable as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub mse_records: Vec<MseRecord>,
    pub mse_summaries: Vec<MseSummary>,
    pub box_samples: Vec<BoxSamples>,
    pub box_stats: Vec<BoxStats>,
    pub extremeness: Vec<ExtremenessRecord>,
    pub failures: Vec<FailureRecord>,
}

const METHOD_BCR: &str = "bcr";
const METHOD_AMP: &str = "amp";

/// Derive a fresh backend seed for one replicate so projection draws are
/// independent across replicates yet fully reproducible.
fn replicate_backend_seed(seed: u64, block: u64, rep: u64) -> u64 {
    substream(seed, &[labels::SIM_BACKEND, block, rep]).random::<u64>()
}

/// Generate one replicate's dataset: AR(1) design, calibrated noise.
fn generate_replicate(
    config: &SimConfig,
    rho: f64,
    sigma2: f64,
    block: u64,
    rep: u64,
) -> Result<Dataset> {
    let mut rng = substream(config.seed, &[labels::SIM_REP, block, rep]);
    let x = gen_design(config.n, config.p, rho, &mut rng);
    let beta = Array1::from_vec(config.beta_true.clone());
    let sd = sigma2.sqrt();
    let noise = Array1::from_shape_fn(config.n, |_| sd * rng.sample::<f64, _>(StandardNormal));
    let y = x.dot(&beta) + &noise;
    let data = Dataset::new(y, x)?;
    if config.standardize {
        data.standardize()
    } else {
        Ok(data)
    }
}

fn mean_squared_error(approx: &[f64], exact: &[f64]) -> f64 {
    let p = exact.len() as f64;
    approx
        .iter()
        .zip(exact.iter())
        .map(|(a, e)| (a - e) * (a - e))
        .sum::<f64>()
        / p
}

/// Run the curve study with an explicit method list. The standard entry
/// point uses the two approximate backends; passing the enumeration
/// backend itself is useful as a self-check (its error is zero).
pub fn run_mse_study_with_backends(
    config: &SimConfig,
    methods: &[(String, Backend)],
) -> Result<SimResult> {
    config.validate()?;
    let lambda = config.resolved_lambda0();
    let options = MarginalOptions {
        allow_unstandardized: true,
    };

    struct RepOutcome {
        rho: f64,
        rho_idx: usize,
        replicate: usize,
        per_method: Vec<std::result::Result<f64, String>>,
    }

    let jobs: Vec<(usize, usize)> = (0..config.rho_grid.len())
        .flat_map(|ri| (0..config.replicates).map(move |r| (ri, r)))
        .collect();

    let outcomes: Vec<Result<RepOutcome>> = jobs
        .par_iter()
        .map(|&(rho_idx, rep)| {
            let rho = config.rho_grid[rho_idx];
            let sigma2 = calibrate_noise(&config.beta_true, rho, config.snr)?;
            let prior = SpikeSlabPrior::new(lambda, config.psi_rule * sigma2, sigma2)?;
            let data = generate_replicate(config, rho, sigma2, rho_idx as u64, rep as u64)?;
            let exact = exact_inclusion_probs(&data, &prior)?;
            let per_method = methods
                .iter()
                .map(|(_, backend)| {
                    let backend = match backend {
                        Backend::Bcr(cfg) => Backend::Bcr(BcrConfig {
                            seed: replicate_backend_seed(
                                config.seed,
                                rho_idx as u64,
                                rep as u64,
                            ),
                            ..*cfg
                        }),
                        other => other.clone(),
                    };
                    approximate_all_marginals(&data, &prior, &backend, &options)
                        .map(|res| {
                            let probs: Vec<f64> =
                                res.iter().map(|r| r.inclusion_prob).collect();
                            mean_squared_error(&probs, &exact)
                        })
                        .map_err(|e| e.to_string())
                })
                .collect();
            Ok(RepOutcome {
                rho,
                rho_idx,
                replicate: rep,
                per_method,
            })
        })
        .collect();

    let mut mse_records = Vec::new();
    let mut failures = Vec::new();
    let mut per_cell: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); methods.len()]; config.rho_grid.len()];
    let mut fail_counts: Vec<Vec<usize>> =
        vec![vec![0; methods.len()]; config.rho_grid.len()];

    for outcome in outcomes {
        let outcome = outcome?;
        for (mi, res) in outcome.per_method.iter().enumerate() {
            let method = methods[mi].0.clone();
            match res {
                Ok(mse) => {
                    mse_records.push(MseRecord {
                        rho: outcome.rho,
                        replicate: outcome.replicate,
                        method,
                        mse: *mse,
                    });
                    per_cell[outcome.rho_idx][mi].push(*mse);
                }
                Err(message) => {
                    fail_counts[outcome.rho_idx][mi] += 1;
                    failures.push(FailureRecord {
                        rho: outcome.rho,
                        snr: config.snr,
                        method,
                        replicate: outcome.replicate,
                        message: message.clone(),
                    });
                }
            }
        }
    }

    let mut mse_summaries = Vec::new();
    for (rho_idx, &rho) in config.rho_grid.iter().enumerate() {
        for (mi, (name, _)) in methods.iter().enumerate() {
            let mut values = per_cell[rho_idx][mi].clone();
            values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite mse"));
            let successes = values.len();
            let (mean_mse, p20, p80) = if successes == 0 {
                (None, None, None)
            } else {
                let mean = values.iter().sum::<f64>() / successes as f64;
                (
                    Some(mean),
                    Some(quantile_sorted(&values, 0.2)),
                    Some(quantile_sorted(&values, 0.8)),
                )
            };
            mse_summaries.push(MseSummary {
                rho,
                method: name.clone(),
                mean_mse,
                p20,
                p80,
                successes,
                failures: fail_counts[rho_idx][mi],
            });
        }
    }

    Ok(SimResult {
        config: config.clone(),
        mse_records,
        mse_summaries,
        box_samples: Vec::new(),
        box_stats: Vec::new(),
        extremeness: Vec::new(),
        failures,
    })
}

/// Accuracy-versus-correlation study with known hyperparameters: both
/// approximate backends against the enumeration reference.
pub fn run_mse_study(config: &SimConfig) -> Result<SimResult> {
    let methods = vec![
        (METHOD_BCR.to_string(), Backend::Bcr(config.bcr)),
        (METHOD_AMP.to_string(), Backend::Amp(config.amp)),
    ];
    run_mse_study_with_backends(config, &methods)
}

/// Starting values for the tuned-hyperparameter protocol. The slab
/// variance is pinned to psi_rule times the initial noise variance and
/// held fixed while (lambda, sigma2) adapt.
const TUNE_SIGMA2_0: f64 = 0.5;
const TUNE_LAMBDA_0: f64 = 0.5;
const BCR_LAMBDA_ROUNDS: usize = 20;
const BCR_LAMBDA_TOL: f64 = 1e-4;

/// Tuned-hyperparameter protocol for the projection backend: sigma2 is
/// handled by its inverse-gamma marginalization, and the prior inclusion
/// probability is refit to the mean of the returned inclusion
/// probabilities until the update stabilizes. Returns the marginal
/// results of the final round.
pub fn bcr_tuned_marginals(
    data: &Dataset,
    psi: f64,
    lambda0: f64,
    bcr: &BcrConfig,
    options: &MarginalOptions,
) -> Result<Vec<crate::combine::MarginalResult>> {
    let p = data.p();
    let lo = 1.0 / p as f64;
    let hi = 1.0 - lo;
    let mut lambda = lambda0.clamp(lo, hi.max(lo));
    let backend = Backend::Bcr(BcrConfig {
        marginalize_sigma2: true,
        ..*bcr
    });
    let mut results = Vec::new();
    for _ in 0..BCR_LAMBDA_ROUNDS {
        let prior = SpikeSlabPrior::new(lambda, psi, TUNE_SIGMA2_0)?;
        results = approximate_all_marginals(data, &prior, &backend, options)?;
        let mean_incl =
            results.iter().map(|r| r.inclusion_prob).sum::<f64>() / p as f64;
        let lambda_new = mean_incl.clamp(lo, hi.max(lo));
        let done = (lambda_new - lambda).abs() < BCR_LAMBDA_TOL;
        lambda = lambda_new;
        if done {
            break;
        }
    }
    Ok(results)
}

fn bcr_tuned_inclusions(
    data: &Dataset,
    psi: f64,
    lambda0: f64,
    bcr: &BcrConfig,
    options: &MarginalOptions,
) -> Result<Vec<f64>> {
    let results = bcr_tuned_marginals(data, psi, lambda0, bcr, options)?;
    Ok(results.iter().map(|r| r.inclusion_prob).collect())
}

/// Box-plot study: per-feature inclusion samples under tuned
/// hyperparameters at each (correlation, signal-to-noise) cell.
pub fn run_boxplot_study(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let cells = config.resolved_cells();
    let lambda0 = config.lambda0.unwrap_or(TUNE_LAMBDA_0);
    let psi = config.psi_rule * TUNE_SIGMA2_0;
    let options = MarginalOptions {
        allow_unstandardized: true,
    };

    struct RepOutcome {
        cell_idx: usize,
        replicate: usize,
        bcr: std::result::Result<Vec<f64>, String>,
        amp: std::result::Result<Vec<f64>, String>,
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|ci| (0..config.replicates).map(move |r| (ci, r)))
        .collect();

    let outcomes: Vec<Result<RepOutcome>> = jobs
        .par_iter()
        .map(|&(cell_idx, rep)| {
            let cell = cells[cell_idx];
            let sigma2_true = calibrate_noise(&config.beta_true, cell.rho, cell.snr)?;
            // Cell indices are offset so the curve and box studies use
            // disjoint replicate substreams under a shared seed.
            let block = 1000 + cell_idx as u64;
            let data = generate_replicate(config, cell.rho, sigma2_true, block, rep as u64)?;

            let bcr_cfg = BcrConfig {
                seed: replicate_backend_seed(config.seed, block, rep as u64),
                ..config.bcr
            };
            let bcr = bcr_tuned_inclusions(&data, psi, lambda0, &bcr_cfg, &options)
                .map_err(|e| e.to_string());

            let amp_backend = Backend::Amp(AmpConfig {
                tune_hyperparams: true,
                ..config.amp
            });
            let prior0 = SpikeSlabPrior::new(lambda0, psi, TUNE_SIGMA2_0)?;
            let amp = approximate_all_marginals(&data, &prior0, &amp_backend, &options)
                .map(|res| res.iter().map(|r| r.inclusion_prob).collect::<Vec<f64>>())
                .map_err(|e| e.to_string());

            Ok(RepOutcome {
                cell_idx,
                replicate: rep,
                bcr,
                amp,
            })
        })
        .collect();

    // samples[cell][method][feature] -> values across replicates.
    let mut samples: Vec<[Vec<Vec<f64>>; 2]> =
        (0..cells.len()).map(|_| [vec![Vec::new(); config.p], vec![Vec::new(); config.p]]).collect();
    let mut failures = Vec::new();

    for outcome in outcomes {
        let outcome = outcome?;
        let cell = cells[outcome.cell_idx];
        for (mi, (name, res)) in [
            (METHOD_BCR, &outcome.bcr),
            (METHOD_AMP, &outcome.amp),
        ]
        .iter()
        .enumerate()
        {
            match res {
                Ok(probs) => {
                    for (j, &prob) in probs.iter().enumerate() {
                        samples[outcome.cell_idx][mi][j].push(prob);
                    }
                }
                Err(message) => failures.push(FailureRecord {
                    rho: cell.rho,
                    snr: cell.snr,
                    method: (*name).to_string(),
                    replicate: outcome.replicate,
                    message: message.clone(),
                }),
            }
        }
    }

    let mut box_samples = Vec::new();
    let mut box_stats = Vec::new();
    let mut extremeness = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for (mi, name) in [METHOD_BCR, METHOD_AMP].iter().enumerate() {
            let mut pooled_total = 0usize;
            let mut pooled_extreme = 0usize;
            for j in 0..config.p {
                let values = &samples[cell_idx][mi][j];
                pooled_total += values.len();
                pooled_extreme += values
                    .iter()
                    .filter(|v| **v < 0.05 || **v > 0.95)
                    .count();
                box_samples.push(BoxSamples {
                    rho: cell.rho,
                    snr: cell.snr,
                    method: (*name).to_string(),
                    feature: j,
                    truth_nonzero: config.beta_true[j] != 0.0,
                    samples: values.clone(),
                });
                if !values.is_empty() {
                    box_stats.push(box_statistics(
                        cell,
                        name,
                        j,
                        config.beta_true[j] != 0.0,
                        values,
                    ));
                }
            }
            if pooled_total > 0 {
                extremeness.push(ExtremenessRecord {
                    rho: cell.rho,
                    snr: cell.snr,
                    method: (*name).to_string(),
                    fraction: pooled_extreme as f64 / pooled_total as f64,
                });
            }
        }
    }

    Ok(SimResult {
        config: config.clone(),
        mse_records: Vec::new(),
        mse_summaries: Vec::new(),
        box_samples,
        box_stats,
        extremeness,
        failures,
    })
}

fn box_statistics(
    cell: &Cell,
    method: &str,
    feature: usize,
    truth_nonzero: bool,
    values: &[f64],
) -> BoxStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite inclusion probability"));
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .copied()
        .find(|v| *v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_hi = sorted
        .iter()
        .rev()
        .copied()
        .find(|v| *v <= hi_fence)
        .unwrap_or(sorted[sorted.len() - 1]);
    BoxStats {
        rho: cell.rho,
        snr: cell.snr,
        method: method.to_string(),
        feature,
        truth_nonzero,
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        n: sorted.len(),
    }
}

/// Serialize a study result as pretty-printed JSON (stable across runs).
pub fn result_to_json(result: &SimResult) -> Result<String> {
    let mut text = serde_json::to_string_pretty(result)?;
    text.push('\n');
    Ok(text)
}

/// Curve-study summary as CSV: one row per (correlation, method).
pub fn mse_summary_csv(result: &SimResult) -> String {
    let mut out = String::from("rho,method,mean_mse,p20,p80,successes,failures\n");
    for s in &result.mse_summaries {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.rho,
            s.method,
            fmt(s.mean_mse),
            fmt(s.p20),
            fmt(s.p80),
            s.successes,
            s.failures
        ));
    }
    out
}

/// Box-study summary as CSV: one row per (cell, method, feature).
pub fn box_stats_csv(result: &SimResult) -> String {
    let mut out = String::from(
        "rho,snr,method,feature,truth_nonzero,median,q1,q3,whisker_lo,whisker_hi,n\n",
    );
    for b in &result.box_stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            b.rho,
            b.snr,
            b.method,
            b.feature,
            b.truth_nonzero,
            b.median,
            b.q1,
            b.q3,
            b.whisker_lo,
            b.whisker_hi,
            b.n
        ));
    }
    out
}
