//! Exact inference by model enumeration.
//!
//! For p up to 20 predictors, every subset of coefficients can be visited
//! explicitly. Under the spike-and-slab prior the marginal likelihood of a
//! model indexed by an inclusion set gamma is N(y | 0, psi X_g X_g' +
//! sigma2 I_n); summing over models yields exact inclusion probabilities,
//! exact posterior means, and the exact posterior predictive of the rotated
//! problem as a finite Gaussian mixture. These serve as ground truth for
//! the approximate backends and the simulation studies.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::combine::GaussianMixture;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{chol_log_det, chol_quad_form, chol_solve, cholesky, LogSumExp, LN_2PI};
use crate::prior::SpikeSlabPrior;
use crate::rotation::RotatedProblem;

/// Hard cap on the number of predictors enumerable as 2^p models.
pub const ENUMERATION_CAP: usize = 20;

/// Inclusion indicators for one model, stored as a bitmask over p columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelIndicator {
    mask: u32,
    p: usize,
}

impl ModelIndicator {
    pub fn new(mask: u32, p: usize) -> Result<Self> {
        if p > 31 {
            return Err(Error::EnumerationTooLarge { p, cap: 31 });
        }
        if p < 32 && mask >= (1u32 << p) {
            return Err(Error::InvalidParameter(format!(
                "indicator mask {mask:#b} has bits beyond p = {p}"
            )));
        }
        Ok(Self { mask, p })
    }

    pub fn empty(p: usize) -> Self {
        Self { mask: 0, p }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of included coefficients.
    pub fn k(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, j: usize) -> bool {
        j < self.p && (self.mask >> j) & 1 == 1
    }

    /// Indices of included coefficients, ascending.
    pub fn included(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.contains(j)).collect()
    }
}

/// Evidence and prior weight of one enumerated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEvidence {
    /// log N(y | 0, psi X_g X_g' + sigma2 I_n).
    pub log_evidence: f64,
    /// log of lambda^k (1-lambda)^(p-k).
    pub log_prior_weight: f64,
}

impl ModelEvidence {
    pub fn log_posterior_unnorm(&self) -> f64 {
        self.log_evidence + self.log_prior_weight
    }
}

/// Precomputed sufficient statistics for repeated evidence evaluation.
struct EvidenceWorkspace {
    gram: Array2<f64>,
    xty: Array1<f64>,
    yty: f64,
    n: usize,
}

impl EvidenceWorkspace {
    fn new(y: ArrayView1<f64>, x: ArrayView2<f64>) -> Self {
        let gram = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let yty = y.dot(&y);
        Self {
            gram,
            xty,
            yty,
            n: y.len(),
        }
    }

    /// Cholesky factor of M = G[idx, idx] + (sigma2/psi) I, together with
    /// the restricted cross-moment vector b = (X'y)[idx].
    fn system(&self, idx: &[usize], prior: &SpikeSlabPrior) -> Result<(Array2<f64>, Array1<f64>)> {
        let k = idx.len();
        let ridge = prior.sigma2 / prior.psi;
        let mut m = Array2::<f64>::zeros((k, k));
        for (r, &ir) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                m[[r, c]] = self.gram[[ir, ic]];
            }
            m[[r, r]] += ridge;
        }
        let b = Array1::from_iter(idx.iter().map(|&i| self.xty[i]));
        let l = cholesky(&m, "ridge-regularized gram submatrix")?;
        Ok((l, b))
    }

    /// Log evidence via the k x k form:
    /// log N(y | 0, psi X_g X_g' + sigma2 I_n)
    ///   = -0.5 [ n ln 2pi + (n-k) ln sigma2 + k ln psi + ln det M
    ///            + (|y|^2 - b' M^{-1} b) / sigma2 ].
    /// Valid for every k by the Weinstein–Aronszajn determinant identity
    /// and the Woodbury inverse; this is the primary evaluation path.
    fn log_evidence(&self, idx: &[usize], prior: &SpikeSlabPrior) -> Result<f64> {
        let n = self.n as f64;
        let k = idx.len() as f64;
        if idx.is_empty() {
            return Ok(-0.5 * (n * (LN_2PI + prior.sigma2.ln()) + self.yty / prior.sigma2));
        }
        let (l, b) = self.system(idx, prior)?;
        let log_det = (n - k) * prior.sigma2.ln() + k * prior.psi.ln() + chol_log_det(&l);
        let quad = (self.yty - chol_quad_form(&l, b.view())) / prior.sigma2;
        Ok(-0.5 * (n * LN_2PI + log_det + quad))
    }
}

fn log_prior_weight(k: usize, p: usize, lambda: f64) -> f64 {
    k as f64 * lambda.ln() + (p - k) as f64 * (1.0 - lambda).ln()
}

/// Exact log marginal likelihood of the data under one model.
///
/// Evaluated through the k x k ridge system (see `EvidenceWorkspace`);
/// `model_log_evidence_dense` provides the direct n x n reference path.
pub fn model_log_evidence(
    data: &Dataset,
    gamma: &ModelIndicator,
    prior: &SpikeSlabPrior,
) -> Result<f64> {
    if gamma.p() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "indicator covers {} columns but data has {}",
            gamma.p(),
            data.p()
        )));
    }
    let ws = EvidenceWorkspace::new(data.y.view(), data.x.view());
    ws.log_evidence(&gamma.included(), prior)
}

/// Reference evaluation of the same quantity via a dense n x n Cholesky of
/// psi X_g X_g' + sigma2 I_n. O(n^3); used to cross-check the primary path.
pub fn model_log_evidence_dense(
    data: &Dataset,
    gamma: &ModelIndicator,
    prior: &SpikeSlabPrior,
) -> Result<f64> {
    if gamma.p() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "indicator covers {} columns but data has {}",
            gamma.p(),
            data.p()
        )));
    }
    let n = data.n();
    let mut phi = Array2::<f64>::zeros((n, n));
    for j in gamma.included() {
        let col = data.x.column(j);
        for r in 0..n {
            for c in 0..n {
                phi[[r, c]] += prior.psi * col[r] * col[c];
            }
        }
    }
    for i in 0..n {
        phi[[i, i]] += prior.sigma2;
    }
    let l = cholesky(&phi, "marginal covariance of y")?;
    let quad = chol_quad_form(&l, data.y.view());
    Ok(-0.5 * (n as f64 * LN_2PI + chol_log_det(&l) + quad))
}

/// Exact posterior inclusion probabilities by full enumeration.
///
/// One pass over all 2^p models, maintaining a streaming log-sum-exp
/// denominator and one streaming numerator per coefficient. Memory is
/// O(p); the enumeration order is fixed (ascending mask), so the result is
/// bit-reproducible.
pub fn exact_inclusion_probs(data: &Dataset, prior: &SpikeSlabPrior) -> Result<Vec<f64>> {
    let p = data.p();
    if p > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            p,
            cap: ENUMERATION_CAP,
        });
    }
    let ws = EvidenceWorkspace::new(data.y.view(), data.x.view());
    let mut denom = LogSumExp::new();
    let mut nums = vec![LogSumExp::new(); p];
    for mask in 0u32..(1u32 << p) {
        let gamma = ModelIndicator { mask, p };
        let idx = gamma.included();
        let lp = ws.log_evidence(&idx, prior)? + log_prior_weight(idx.len(), p, prior.lambda);
        denom.add(lp);
        for &j in &idx {
            nums[j].add(lp);
        }
    }
    let log_denom = denom.value();
    Ok(nums
        .iter()
        .map(|acc| {
            let v = (acc.value() - log_denom).exp();
            v.clamp(0.0, 1.0)
        })
        .collect())
}

/// Exact posterior mean E[beta | y] by full enumeration (two passes:
/// normalizer, then weighted conditional means).
pub fn exact_posterior_mean(data: &Dataset, prior: &SpikeSlabPrior) -> Result<Vec<f64>> {
    let p = data.p();
    if p > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            p,
            cap: ENUMERATION_CAP,
        });
    }
    let ws = EvidenceWorkspace::new(data.y.view(), data.x.view());
    let mut denom = LogSumExp::new();
    let mut log_posts = Vec::with_capacity(1usize << p);
    for mask in 0u32..(1u32 << p) {
        let gamma = ModelIndicator { mask, p };
        let idx = gamma.included();
        let lp = ws.log_evidence(&idx, prior)? + log_prior_weight(idx.len(), p, prior.lambda);
        log_posts.push(lp);
        denom.add(lp);
    }
    let log_denom = denom.value();
    let mut mean = vec![0.0; p];
    for mask in 0u32..(1u32 << p) {
        let gamma = ModelIndicator { mask, p };
        let idx = gamma.included();
        if idx.is_empty() {
            continue;
        }
        let w = (log_posts[mask as usize] - log_denom).exp();
        let (l, b) = ws.system(&idx, prior)?;
        let cond_mean = chol_solve(&l, b.view());
        for (pos, &j) in idx.iter().enumerate() {
            mean[j] += w * cond_mean[pos];
        }
    }
    Ok(mean)
}

/// Exact posterior predictive of the held-out projection, as a Gaussian
/// mixture over all 2^(p-1) nuisance models.
///
/// For each nuisance subset the conjugate update on the rotated data gives
/// a Gaussian component N(mu_g, s2_g) with
///   mu_g = u' M^{-1} b,            s2_g = sigma2 (1 + u' M^{-1} u),
/// where M = Xt_g' Xt_g + (sigma2/psi) I, b = Xt_g' yt, u = x_new
/// restricted to the subset; the mixture weight is the model's posterior
/// probability given the reduced data. One Cholesky per subset serves both
/// the weight and the component.
pub fn exact_rotated_predictive(
    rot: &RotatedProblem,
    prior: &SpikeSlabPrior,
) -> Result<GaussianMixture> {
    let p_prime = rot.p_reduced();
    if p_prime > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            p: p_prime,
            cap: ENUMERATION_CAP,
        });
    }
    let ws = EvidenceWorkspace::new(rot.y_tilde.view(), rot.x_tilde.view());
    let n_t = ws.n as f64;
    let count = 1usize << p_prime;
    let mut log_weights = Vec::with_capacity(count);
    let mut means = Vec::with_capacity(count);
    let mut variances = Vec::with_capacity(count);
    for mask in 0u32..(count as u32) {
        let gamma = ModelIndicator {
            mask,
            p: p_prime,
        };
        let idx = gamma.included();
        let k = idx.len() as f64;
        let lpw = log_prior_weight(idx.len(), p_prime, prior.lambda);
        if idx.is_empty() {
            let le = -0.5 * (n_t * (LN_2PI + prior.sigma2.ln()) + ws.yty / prior.sigma2);
            log_weights.push(le + lpw);
            means.push(0.0);
            variances.push(prior.sigma2);
            continue;
        }
        let (l, b) = ws.system(&idx, prior)?;
        let log_det = (n_t - k) * prior.sigma2.ln() + k * prior.psi.ln() + chol_log_det(&l);
        let quad = (ws.yty - chol_quad_form(&l, b.view())) / prior.sigma2;
        let le = -0.5 * (n_t * LN_2PI + log_det + quad);
        log_weights.push(le + lpw);

        let u = Array1::from_iter(idx.iter().map(|&i| rot.x_tilde_new[i]));
        let cond_mean = chol_solve(&l, b.view());
        means.push(u.dot(&cond_mean));
        variances.push(prior.sigma2 * (1.0 + chol_quad_form(&l, u.view())));
    }
    GaussianMixture::new(log_weights, means, variances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_dataset(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = substream(seed, &[5]);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        Dataset::new(y, x).unwrap()
    }

    fn prior(lambda: f64, psi: f64, sigma2: f64) -> SpikeSlabPrior {
        SpikeSlabPrior::new(lambda, psi, sigma2).unwrap()
    }

    #[test]
    fn indicator_bookkeeping() {
        let g = ModelIndicator::new(0b1011, 4).unwrap();
        assert_eq!(g.k(), 3);
        assert!(g.contains(0) && g.contains(1) && !g.contains(2) && g.contains(3));
        assert_eq!(g.included(), vec![0, 1, 3]);
        assert!(ModelIndicator::new(0b100, 2).is_err());
    }

    #[test]
    fn empty_model_evidence_closed_form() {
        let d = gaussian_dataset(1, 8, 3);
        let pr = prior(0.5, 2.0, 1.7);
        let got = model_log_evidence(&d, &ModelIndicator::empty(3), &pr).unwrap();
        let n = d.n() as f64;
        let expect =
            -0.5 * n * (LN_2PI + pr.sigma2.ln()) - d.y.dot(&d.y) / (2.0 * pr.sigma2);
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn rank_one_evidence_matches_direct_determinant_lemma() {
        // Single unit column, n = 2, psi = 1, sigma2 = 1, y = (1, 0):
        // covariance = I + x x' with x = e1, i.e. diag(2, 1).
        let x = arr2(&[[1.0], [0.0]]);
        let y = arr1(&[1.0, 0.0]);
        let d = Dataset::new(y, x).unwrap();
        let pr = prior(0.5, 1.0, 1.0);
        let g = ModelIndicator::new(1, 1).unwrap();
        let low = model_log_evidence(&d, &g, &pr).unwrap();
        let dense = model_log_evidence_dense(&d, &g, &pr).unwrap();
        assert_abs_diff_eq!(low, dense, epsilon = 1e-12);
        // Direct: -0.5 (2 ln 2pi + ln 2 + 1/2).
        let direct = -0.5 * (2.0 * LN_2PI + 2.0_f64.ln() + 0.5);
        assert_abs_diff_eq!(low, direct, epsilon = 1e-12);
    }

    #[test]
    fn dense_and_low_rank_paths_agree() {
        let d = gaussian_dataset(7, 9, 5);
        let pr = prior(0.3, 3.0, 0.8);
        for mask in 0u32..(1 << 5) {
            let g = ModelIndicator::new(mask, 5).unwrap();
            let a = model_log_evidence(&d, &g, &pr).unwrap();
            let b = model_log_evidence_dense(&d, &g, &pr).unwrap();
            assert!(
                (a - b).abs() < 1e-10 * a.abs().max(1.0),
                "paths disagree on mask {mask:#b}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn evidence_matches_extended_precision_reference() {
        // Fixed 10 x 4 problem with two-decimal literals; the expected value
        // was computed once with 50-digit arithmetic from the same literals
        // and frozen here.
        let x = arr2(&[
            [0.49, -0.92, 1.43, 0.27],
            [-1.21, 0.34, -0.05, 0.88],
            [0.72, 1.57, -0.66, -0.31],
            [-0.18, -0.44, 0.91, 1.12],
            [1.05, 0.23, 0.38, -0.75],
            [-0.64, 0.81, -1.32, 0.4],
            [0.11, -1.08, 0.57, -0.2],
            [0.93, 0.46, -0.79, 1.3],
            [-0.37, -0.55, 0.14, -0.98],
            [0.26, 1.19, 0.62, 0.05],
        ]);
        let y = arr1(&[1.3, -0.7, 2.1, 0.4, -1.5, 0.9, -0.2, 1.8, -1.1, 0.6]);
        let d = Dataset::new(y, x).unwrap();
        let pr = prior(0.5, 2.5, 1.3);
        let g = ModelIndicator::new(0b1101, 4).unwrap();
        let got = model_log_evidence(&d, &g, &pr).unwrap();
        let expect = EXTENDED_PRECISION_LOG_EVIDENCE;
        assert!(
            (got - expect).abs() < 1e-10,
            "log evidence {got:.15} vs frozen reference {expect:.15}"
        );
    }

    /// Frozen from a 50-digit computation of
    /// log N(y | 0, psi X_g X_g' + sigma2 I) on the literals above
    /// (gamma = {0, 2, 3}, psi = 2.5, sigma2 = 1.3).
    const EXTENDED_PRECISION_LOG_EVIDENCE: f64 = -17.295_884_076_241_196;

    #[test]
    fn single_predictor_inclusion_closed_form() {
        let d = gaussian_dataset(3, 12, 1);
        let pr = prior(0.35, 4.0, 1.1);
        let probs = exact_inclusion_probs(&d, &pr).unwrap();
        let le0 = model_log_evidence(&d, &ModelIndicator::empty(1), &pr).unwrap();
        let le1 = model_log_evidence(&d, &ModelIndicator::new(1, 1).unwrap(), &pr).unwrap();
        let l0 = (1.0 - pr.lambda).ln() + le0;
        let l1 = pr.lambda.ln() + le1;
        let expect = (l1 - crate::math::log_sum_exp(&[l0, l1])).exp();
        assert_abs_diff_eq!(probs[0], expect, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_design_factorizes() {
        // X = I_3 (n = 3, p = 3): coordinates decouple, so the joint
        // enumeration must match the per-coordinate two-model formula.
        let x = arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let y = arr1(&[0.4, -1.9, 2.6]);
        let d = Dataset::new(y.clone(), x).unwrap();
        let pr = prior(0.4, 3.0, 0.9);
        let probs = exact_inclusion_probs(&d, &pr).unwrap();
        for j in 0..3 {
            let z = y[j];
            let l0 = (1.0 - pr.lambda).ln() + crate::math::ln_normal_pdf(z, 0.0, pr.sigma2);
            let l1 =
                pr.lambda.ln() + crate::math::ln_normal_pdf(z, 0.0, pr.sigma2 + pr.psi);
            let expect = (l1 - crate::math::log_sum_exp(&[l0, l1])).exp();
            assert_abs_diff_eq!(probs[j], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn posterior_model_probabilities_sum_to_one() {
        let d = gaussian_dataset(11, 10, 6);
        let pr = prior(0.25, 2.0, 1.0);
        let ws = EvidenceWorkspace::new(d.y.view(), d.x.view());
        let mut all = Vec::new();
        for mask in 0u32..(1 << 6) {
            let g = ModelIndicator::new(mask, 6).unwrap();
            let lp = ws.log_evidence(&g.included(), &pr).unwrap()
                + log_prior_weight(g.k(), 6, pr.lambda);
            all.push(lp);
        }
        let total = crate::math::log_sum_exp(&all);
        let sum: f64 = all.iter().map(|lp| (lp - total).exp()).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let d = gaussian_dataset(2, 4, 3);
        let pr = prior(0.5, 1.0, 1.0);
        // A fake wide dataset is wasteful to build; instead check the error
        // via a 21+ column dataset assembled directly.
        let mut rng = substream(0, &[1]);
        let x = Array2::from_shape_fn((5, 21), |_| rng.sample::<f64, _>(StandardNormal));
        let yy = Array1::from_shape_fn(5, |_| rng.sample::<f64, _>(StandardNormal));
        let wide = Dataset::new(yy, x).unwrap();
        match exact_inclusion_probs(&wide, &pr) {
            Err(Error::EnumerationTooLarge { p, cap }) => {
                assert_eq!(p, 21);
                assert_eq!(cap, 20);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
        assert!(exact_inclusion_probs(&d, &pr).is_ok());
    }

    #[test]
    fn stronger_signal_never_lowers_inclusion() {
        // Ladder of signal strengths on coefficient 0, everything else
        // fixed: inclusion probability must be nondecreasing. The noise
        // draw is oriented so its projection on column 0 is nonnegative
        // (a sign flip yields an equally likely draw); otherwise a small
        // added signal can cancel the noise projection and the ladder is
        // not monotone even in exact arithmetic.
        for seed in [4u64, 9, 17] {
            let mut rng = substream(seed, &[2]);
            let n = 25;
            let p = 5;
            let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
            let mut noise =
                Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            if x.column(0).dot(&noise) < 0.0 {
                noise.mapv_inplace(|v| -v);
            }
            let pr = prior(0.3, 2.0, 1.0);
            let mut last = -1.0;
            for scale in [0.0, 0.5, 1.0, 2.0, 4.0] {
                let y = Array1::from_shape_fn(n, |i| scale * x[[i, 0]] + noise[i]);
                let d = Dataset::new(y, x.clone()).unwrap();
                let probs = exact_inclusion_probs(&d, &pr).unwrap();
                assert!(
                    probs[0] >= last - 1e-12,
                    "seed {seed}: inclusion fell from {last} to {} at scale {scale}",
                    probs[0]
                );
                last = probs[0];
            }
        }
    }

    #[test]
    fn rotated_predictive_single_predictor_is_pure_noise() {
        let d = gaussian_dataset(21, 9, 1);
        let pr = prior(0.5, 2.0, 1.4);
        let rot = crate::rotation::rotate_for_index(&d, 0, 0).unwrap();
        let mix = exact_rotated_predictive(&rot, &pr).unwrap();
        assert_eq!(mix.len(), 1);
        assert_abs_diff_eq!(mix.log_weights[0], 0.0, epsilon = 1e-14);
        assert_eq!(mix.means[0], 0.0);
        assert_abs_diff_eq!(mix.variances[0], pr.sigma2, epsilon = 1e-14);
    }

    #[test]
    fn posterior_mean_matches_ridge_when_lambda_near_one() {
        // With lambda -> 1 the full model dominates and the posterior mean
        // approaches the ridge solution (X'X + (sigma2/psi) I)^{-1} X'y.
        let d = gaussian_dataset(31, 40, 4);
        let pr = prior(1.0 - 1e-12, 2.0, 1.0);
        let mean = exact_posterior_mean(&d, &pr).unwrap();
        let ws = EvidenceWorkspace::new(d.y.view(), d.x.view());
        let (l, b) = ws.system(&[0, 1, 2, 3], &pr).unwrap();
        let ridge = chol_solve(&l, b.view());
        for j in 0..4 {
            assert_abs_diff_eq!(mean[j], ridge[j], epsilon = 1e-6);
        }
    }
}
