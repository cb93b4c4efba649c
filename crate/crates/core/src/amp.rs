//! Approximate message passing with the spike-and-slab denoiser.
//!
//! The iteration alternates a linear residual step, corrected by the
//! Onsager term so the effective per-coordinate observations decouple,
//! with the scalar posterior-moment map of the prior. Columns are
//! normalized to unit length internally (the slab variance is rescaled
//! per column to compensate) and results are mapped back to the original
//! scale. Two schedules are available: the standard parallel update with
//! damping, and a serial coordinate sweep that is exact on orthogonal
//! designs in a single pass.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::combine::GaussianPredictive;
use crate::error::{Error, Result};
use crate::math::{ln_normal_pdf, log_sum_exp2};
use crate::prior::SpikeSlabPrior;

/// Update ordering of the message-passing iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmpSchedule {
    /// All coordinates updated from the same residual, with damping and an
    /// Onsager correction; the effective noise level is tracked
    /// empirically as |residual|^2 / n.
    Parallel,
    /// One coordinate at a time with the residual updated in-sweep; the
    /// effective noise adds the explicit interference term
    /// sigma2 + sum_{k != j} G_{jk}^2 v_k. Exact on orthogonal designs.
    Serial,
}

/// Configuration of the message-passing backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpConfig {
    pub max_iter: usize,
    /// Convergence threshold on the relative l2 change of the mean vector.
    pub tol: f64,
    /// Fraction of the proposed update applied each iteration (1 = none).
    pub damping: f64,
    pub schedule: AmpSchedule,
    /// Enable iterative re-estimation of (lambda, sigma2).
    pub tune_hyperparams: bool,
    pub em_max_rounds: usize,
    pub em_tol: f64,
    /// Reserved for randomized variants; the recursion itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            damping: 0.5,
            schedule: AmpSchedule::Parallel,
            tune_hyperparams: false,
            em_max_rounds: 50,
            em_tol: 1e-6,
            seed: 0,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Snapshot of the message-passing iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Posterior mean estimates, original column scale.
    pub m: Array1<f64>,
    /// Posterior marginal variances, original column scale.
    pub v: Array1<f64>,
    /// Per-coordinate inclusion probabilities from the last denoiser pass.
    pub incl: Array1<f64>,
    /// Final residual vector.
    pub residual: Array1<f64>,
    /// Effective scalar noise level of the decoupled observations.
    pub tau_t2: f64,
    /// Iterations actually performed.
    pub iteration: usize,
    /// Damping factor the run used.
    pub damping: f64,
    pub converged: bool,
}

/// Posterior moments of the scalar spike-and-slab model observed through
/// additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseResult {
    pub mean: f64,
    pub var: f64,
    pub incl: f64,
}

/// Closed-form posterior moments of beta ~ (1-lambda) delta0 + lambda
/// N(0, psi) given the observation r = beta + N(0, s2).
pub fn spike_slab_denoise(r: f64, s2: f64, prior: &SpikeSlabPrior) -> Result<DenoiseResult> {
    if !(s2 > 0.0) || !s2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "observation noise variance must be positive and finite, got {s2}"
        )));
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("denoiser input is not finite".into()));
    }
    let lambda = prior.lambda;
    let psi = prior.psi;
    let log_spike = (1.0 - lambda).ln() + ln_normal_pdf(r, 0.0, s2);
    let log_slab = lambda.ln() + ln_normal_pdf(r, 0.0, psi + s2);
    let incl = (log_slab - log_sum_exp2(log_spike, log_slab)).exp();
    let cond_mean = psi * r / (psi + s2);
    let cond_var = psi * s2 / (psi + s2);
    let mean = incl * cond_mean;
    let var = (incl * (cond_var + cond_mean * cond_mean) - mean * mean).max(0.0);
    Ok(DenoiseResult { mean, var, incl })
}

/// Column norms and the unit-column view of the design. Zero-norm columns
/// are recorded and left out of the iteration (they carry no information;
/// their outputs are the prior moments).
struct NormalizedDesign {
    a: Array2<f64>,
    norms: Array1<f64>,
    /// Per-column slab variance after rescaling: psi * norm^2.
    slab: Array1<f64>,
}

impl NormalizedDesign {
    fn new(x: ArrayView2<f64>, psi: f64) -> Self {
        let p = x.ncols();
        let mut a = x.to_owned();
        let mut norms = Array1::<f64>::zeros(p);
        let mut slab = Array1::<f64>::zeros(p);
        for j in 0..p {
            let mut col = a.column_mut(j);
            let norm = col.dot(&col).sqrt();
            norms[j] = norm;
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
                slab[j] = psi * norm * norm;
            }
        }
        Self { a, norms, slab }
    }
}

const TAU2_FLOOR: f64 = 1e-30;
const REL_CHANGE_FLOOR: f64 = 1e-12;

/// Run the message-passing iteration on (y, X) under the prior.
///
/// Inputs are used as given (normalization is internal); the returned
/// moments refer to the original coefficient scale. Non-convergence at
/// max_iter is reported through the `converged` flag; a diverging noise
/// track (beyond 1e6 times its initial value) is an error carrying the
/// iteration trace.
pub fn amp_run(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    prior: &SpikeSlabPrior,
    config: &AmpConfig,
) -> Result<AmpState> {
    config.validate()?;
    let n = y.len();
    let p = x.ncols();
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!(
            "design must be nonempty, got {n} rows x {p} columns"
        )));
    }
    if x.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {n} rows but design has {}",
            x.nrows()
        )));
    }
    match config.schedule {
        AmpSchedule::Parallel => run_parallel(y, x, prior, config),
        AmpSchedule::Serial => run_serial(y, x, prior, config),
    }
}

fn column_prior(prior: &SpikeSlabPrior, slab_j: f64) -> SpikeSlabPrior {
    SpikeSlabPrior {
        lambda: prior.lambda,
        psi: slab_j,
        sigma2: prior.sigma2,
    }
}

/// Map internal (unit-column) moments back to the original scale, filling
/// zero-norm columns with the prior moments.
fn finalize(
    design: &NormalizedDesign,
    prior: &SpikeSlabPrior,
    m_int: &Array1<f64>,
    v_int: &Array1<f64>,
    incl: &Array1<f64>,
    residual: Array1<f64>,
    tau_t2: f64,
    iteration: usize,
    damping: f64,
    converged: bool,
) -> AmpState {
    let p = m_int.len();
    let mut m = Array1::<f64>::zeros(p);
    let mut v = Array1::<f64>::zeros(p);
    let mut incl_out = incl.clone();
    for j in 0..p {
        let d = design.norms[j];
        if d > 0.0 {
            m[j] = m_int[j] / d;
            v[j] = v_int[j] / (d * d);
        } else {
            m[j] = 0.0;
            v[j] = prior.lambda * prior.psi;
            incl_out[j] = prior.lambda;
        }
    }
    AmpState {
        m,
        v,
        incl: incl_out,
        residual,
        tau_t2,
        iteration,
        damping,
        converged,
    }
}

fn run_parallel(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    prior: &SpikeSlabPrior,
    config: &AmpConfig,
) -> Result<AmpState> {
    let n = y.len();
    let p = x.ncols();
    let design = NormalizedDesign::new(x, prior.psi);
    let a = &design.a;
    let d = config.damping;

    let mut m = Array1::<f64>::zeros(p);
    let mut v = Array1::from_shape_fn(p, |j| {
        if design.norms[j] > 0.0 {
            prior.lambda * design.slab[j]
        } else {
            0.0
        }
    });
    let mut incl = Array1::from_elem(p, prior.lambda);
    let mut residual = y.to_owned();
    let mut tau2 = (residual.dot(&residual) / n as f64).max(TAU2_FLOOR);
    let tau0 = tau2;
    let mut trace = vec![tau2];

    let mut converged = false;
    let mut iteration = 0;
    while iteration < config.max_iter {
        iteration += 1;
        let r = &m + &a.t().dot(&residual);
        let mut m_prop = Array1::<f64>::zeros(p);
        let mut v_new = Array1::<f64>::zeros(p);
        let mut incl_new = Array1::<f64>::zeros(p);
        for j in 0..p {
            if design.norms[j] == 0.0 {
                continue;
            }
            let res = spike_slab_denoise(r[j], tau2, &column_prior(prior, design.slab[j]))?;
            m_prop[j] = res.mean;
            v_new[j] = res.var;
            incl_new[j] = res.incl;
        }
        let m_next = &m_prop * d + &m * (1.0 - d);
        let onsager_scale = v_new.sum() / (n as f64 * tau2);
        let res_prop = &y.to_owned() - &a.dot(&m_next) + &(&residual * onsager_scale);
        let res_next = &res_prop * d + &residual * (1.0 - d);

        let delta = (&m_next - &m).mapv(|t| t * t).sum().sqrt();
        let scale = m_next.dot(&m_next).sqrt().max(REL_CHANGE_FLOOR);

        m = m_next;
        v = v_new;
        incl = incl_new;
        residual = res_next;
        tau2 = (residual.dot(&residual) / n as f64).max(TAU2_FLOOR);
        trace.push(tau2);

        if !tau2.is_finite() || tau2 > 1e6 * tau0 {
            return Err(Error::Diverged {
                iteration,
                tau_t2: tau2,
                tau0,
                trace,
            });
        }
        if delta / scale < config.tol {
            converged = true;
            break;
        }
    }
    Ok(finalize(
        &design, prior, &m, &v, &incl, residual, tau2, iteration, d, converged,
    ))
}

fn run_serial(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    prior: &SpikeSlabPrior,
    config: &AmpConfig,
) -> Result<AmpState> {
    let n = y.len();
    let p = x.ncols();
    let design = NormalizedDesign::new(x, prior.psi);
    let a = &design.a;
    let d = config.damping;

    // Off-diagonal squared Gram entries drive the interference term.
    let gram = a.t().dot(a);
    let mut gram2 = gram.mapv(|g| g * g);
    for j in 0..p {
        gram2[[j, j]] = 0.0;
    }

    let mut m = Array1::<f64>::zeros(p);
    let mut v = Array1::from_shape_fn(p, |j| {
        if design.norms[j] > 0.0 {
            prior.lambda * design.slab[j]
        } else {
            0.0
        }
    });
    let mut incl = Array1::from_elem(p, prior.lambda);
    let mut residual = y.to_owned();
    let tau0 = (residual.dot(&residual) / n as f64).max(TAU2_FLOOR);
    let mut trace = vec![tau0];

    let mut converged = false;
    let mut iteration = 0;
    while iteration < config.max_iter {
        iteration += 1;
        let m_before = m.clone();
        for j in 0..p {
            if design.norms[j] == 0.0 {
                continue;
            }
            let col = a.column(j);
            let r_j = m[j] + col.dot(&residual);
            let s2 = prior.sigma2 + gram2.row(j).dot(&v);
            let res = spike_slab_denoise(r_j, s2, &column_prior(prior, design.slab[j]))?;
            let m_new = d * res.mean + (1.0 - d) * m[j];
            let v_new = d * res.var + (1.0 - d) * v[j];
            let step = m_new - m[j];
            if step != 0.0 {
                residual.scaled_add(-step, &col);
            }
            m[j] = m_new;
            v[j] = v_new;
            incl[j] = res.incl;
        }
        let tau2 = (residual.dot(&residual) / n as f64).max(TAU2_FLOOR);
        trace.push(tau2);
        if !tau2.is_finite() || tau2 > 1e6 * tau0 {
            return Err(Error::Diverged {
                iteration,
                tau_t2: tau2,
                tau0,
                trace,
            });
        }
        let delta = (&m - &m_before).mapv(|t| t * t).sum().sqrt();
        let scale = m.dot(&m).sqrt().max(REL_CHANGE_FLOOR);
        if delta / scale < config.tol {
            converged = true;
            break;
        }
    }
    let tau2 = (residual.dot(&residual) / n as f64).max(TAU2_FLOOR);
    Ok(finalize(
        &design, prior, &m, &v, &incl, residual, tau2, iteration, d, converged,
    ))
}

/// Predictive moments for a new feature vector:
/// mu = x_new' m, tau2 = x_new' diag(v) x_new + sigma2.
pub fn amp_predictive(
    state: &AmpState,
    x_new: ArrayView1<f64>,
    sigma2: f64,
) -> Result<GaussianPredictive> {
    if x_new.len() != state.m.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature vector has {} entries but state has {}",
            x_new.len(),
            state.m.len()
        )));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    let mu = x_new.dot(&state.m);
    let mut quad = 0.0;
    for j in 0..x_new.len() {
        quad += x_new[j] * x_new[j] * state.v[j];
    }
    GaussianPredictive::new(mu, quad + sigma2)
}

/// Iterative re-estimation of (lambda, sigma2) with the slab variance held
/// fixed: alternate a full message-passing run with the moment updates
///   lambda <- mean(incl_j)           (clamped to [1/p, 1 - 1/p])
///   sigma2 <- (|y - X m|^2 + sum_j |x_j|^2 v_j) / n   (floored at 1e-8)
/// until both relative changes fall below em_tol.
pub fn em_tune(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    prior0: &SpikeSlabPrior,
    config: &AmpConfig,
) -> Result<(SpikeSlabPrior, AmpState)> {
    const SIGMA2_FLOOR: f64 = 1e-8;
    let n = y.len() as f64;
    let p = x.ncols();
    if p == 0 {
        return Err(Error::InvalidParameter(
            "cannot tune hyperparameters with no columns".into(),
        ));
    }
    let lo = 1.0 / p as f64;
    let hi = 1.0 - lo;
    let mut prior = *prior0;
    let inner = AmpConfig {
        tune_hyperparams: false,
        ..*config
    };
    let col_norm2: Vec<f64> = (0..p)
        .map(|j| {
            let col = x.column(j);
            col.dot(&col)
        })
        .collect();

    let mut state = match amp_run(y, x, &prior, &inner) {
        Ok(s) => s,
        Err(Error::Diverged { .. }) => {
            return Err(Error::TuningAborted {
                round: 0,
                lambda: prior.lambda,
                sigma2: prior.sigma2,
            })
        }
        Err(e) => return Err(e),
    };
    for round in 1..=config.em_max_rounds {
        let lambda_new = (state.incl.sum() / p as f64).clamp(lo, hi.max(lo));
        let fit = &y.to_owned() - &x.dot(&state.m);
        let mut correction = 0.0;
        for j in 0..p {
            correction += col_norm2[j] * state.v[j];
        }
        let sigma2_new = ((fit.dot(&fit) + correction) / n).max(SIGMA2_FLOOR);

        let rel_l = (lambda_new - prior.lambda).abs() / prior.lambda.max(1e-12);
        let rel_s = (sigma2_new - prior.sigma2).abs() / prior.sigma2.max(1e-12);
        prior = SpikeSlabPrior {
            lambda: lambda_new,
            psi: prior.psi,
            sigma2: sigma2_new,
        };
        state = match amp_run(y, x, &prior, &inner) {
            Ok(s) => s,
            Err(Error::Diverged { .. }) => {
                return Err(Error::TuningAborted {
                    round,
                    lambda: prior.lambda,
                    sigma2: prior.sigma2,
                })
            }
            Err(e) => return Err(e),
        };
        if rel_l < config.em_tol && rel_s < config.em_tol {
            break;
        }
    }
    Ok((prior, state))
}
