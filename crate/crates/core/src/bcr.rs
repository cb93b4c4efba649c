//! Random-projection model-averaged predictive (compressed regression).
//!
//! The nuisance design is compressed through K random sparse projections
//! Theta (p' x m, orthonormalized); each compressed model is conjugate
//! Gaussian, so its predictive moments and marginal likelihood are exact.
//! Averaging the per-projection predictives with evidence-proportional
//! weights yields a single Gaussian approximation of the posterior
//! predictive. A variant marginalizes the noise variance under an
//! inverse-gamma prior, moment-matching the resulting Student predictive.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::combine::{GaussianMixture, GaussianPredictive};
use crate::error::{Error, Result};
use crate::math::{chol_log_det, chol_quad_form, chol_solve, cholesky, ln_gamma, LN_2PI};
use crate::prior::SpikeSlabPrior;
use crate::rng::{substream, labels};

/// Configuration for the projection backend.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcrConfig {
    /// Prior variance of the compressed coefficients. `None` uses the
    /// spike-and-slab slab variance psi.
    pub kappa: Option<f64>,
    /// Projection dimension m. `None` uses ceil(lambda * p') + 2, clamped
    /// to the problem size.
    pub projection_dim: Option<usize>,
    /// Number of model-averaged projections K.
    pub num_projections: usize,
    /// Seed for the per-draw random streams.
    pub seed: u64,
    /// Marginalize the noise variance under an inverse-gamma prior instead
    /// of conditioning on a known value.
    pub marginalize_sigma2: bool,
    /// Inverse-gamma shape (must exceed 1 when marginalizing so the prior
    /// mean exists).
    pub ig_shape: f64,
    /// Inverse-gamma scale.
    pub ig_scale: f64,
    /// Average the full mixture variance (including between-mean spread)
    /// instead of the plain weighted average of component variances.
    pub full_mixture_variance: bool,
    /// Wholesale resampling attempts before giving up on a full-rank draw.
    pub max_rank_retries: usize,
}

impl Default for BcrConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            projection_dim: None,
            num_projections: 10,
            seed: 0,
            marginalize_sigma2: false,
            ig_shape: 3.0,
            ig_scale: 1.0,
            full_mixture_variance: false,
            max_rank_retries: 100,
        }
    }
}

impl BcrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_projections == 0 {
            return Err(Error::InvalidParameter(
                "number of projections must be at least 1".into(),
            ));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "kappa must be positive and finite, got {k}"
                )));
            }
        }
        if let Some(m) = self.projection_dim {
            if m == 0 {
                return Err(Error::InvalidParameter(
                    "projection dimension must be at least 1".into(),
                ));
            }
        }
        if self.marginalize_sigma2 && !(self.ig_shape > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma shape must exceed 1 when marginalizing, got {}",
                self.ig_shape
            )));
        }
        if self.marginalize_sigma2 && !(self.ig_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma scale must be positive, got {}",
                self.ig_scale
            )));
        }
        Ok(())
    }

    /// Resolved projection dimension for a problem with p' columns and
    /// n_rows rows: the configured value, or ceil(lambda*p')+2; clamped to
    /// min(p', n_rows) and floored at 1.
    pub fn effective_projection_dim(&self, p_prime: usize, n_rows: usize, lambda: f64) -> usize {
        let raw = self
            .projection_dim
            .unwrap_or_else(|| default_projection_dim(lambda, p_prime));
        raw.min(p_prime).min(n_rows).max(1)
    }
}

/// Heuristic projection dimension: the expected model size plus slack.
pub fn default_projection_dim(lambda: f64, p_prime: usize) -> usize {
    (lambda * p_prime as f64).ceil() as usize + 2
}

/// One accepted random projection.
#[derive(Debug, Clone)]
pub struct ProjectionDraw {
    /// Sparsity parameter drawn uniformly on (0.1, 0.9).
    pub theta: f64,
    /// Orthonormalized projection matrix, p' x m.
    pub matrix: Array2<f64>,
    /// Unnormalized log model weight; populated by the model-averaging
    /// driver, zero straight out of the sampler.
    pub log_weight: f64,
}

/// Draw one entry of the raw projection: value -sqrt(1/theta) with
/// probability theta^2, +sqrt(1/theta) with probability (1-theta)^2, and 0
/// otherwise (the three probabilities sum to one by the binomial square).
pub fn sample_three_point<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let val = (1.0 / theta).sqrt();
    let u: f64 = rng.random();
    if u < theta * theta {
        -val
    } else if u < theta * theta + (1.0 - theta) * (1.0 - theta) {
        val
    } else {
        0.0
    }
}

/// Orthonormalize the columns of `q` in place by modified Gram-Schmidt with
/// one reorthogonalization pass. Returns false if a column's remainder
/// falls below `tol` (rank deficiency).
fn gram_schmidt(q: &mut Array2<f64>, tol: f64) -> bool {
    let m = q.ncols();
    for c in 0..m {
        for _pass in 0..2 {
            if c > 0 {
                let (prev, mut rest) = q.view_mut().split_at(ndarray::Axis(1), c);
                let mut col = rest.column_mut(0);
                let coeffs = prev.t().dot(&col);
                let correction = prev.dot(&coeffs);
                col -= &correction;
            }
        }
        let mut col = q.column_mut(c);
        let norm = col.dot(&col).sqrt();
        if norm < tol {
            return false;
        }
        col.mapv_inplace(|v| v / norm);
    }
    true
}

/// Draw a projection: sample theta, fill the p' x m matrix from the
/// three-point distribution, resample wholesale until full rank, then
/// orthonormalize.
pub fn sample_projection<R: Rng + ?Sized>(
    p_prime: usize,
    m: usize,
    config: &BcrConfig,
    rng: &mut R,
) -> Result<ProjectionDraw> {
    if m == 0 || m > p_prime {
        return Err(Error::InvalidParameter(format!(
            "projection dimension {m} must lie in [1, {p_prime}]"
        )));
    }
    let retries = config.max_rank_retries.max(1);
    for _attempt in 0..retries {
        let theta: f64 = rng.random_range(0.1..0.9);
        let mut mat = Array2::<f64>::zeros((p_prime, m));
        for v in mat.iter_mut() {
            *v = sample_three_point(theta, rng);
        }
        let max_col_norm = (0..m)
            .map(|c| {
                let col = mat.column(c);
                col.dot(&col).sqrt()
            })
            .fold(0.0_f64, f64::max);
        if max_col_norm == 0.0 {
            continue;
        }
        let tol = 1e-10 * max_col_norm;
        if gram_schmidt(&mut mat, tol) {
            return Ok(ProjectionDraw {
                theta,
                matrix: mat,
                log_weight: 0.0,
            });
        }
    }
    Err(Error::RankDeficientProjection { retries })
}

/// Cholesky-factored compressed system shared by the predictive moments
/// and the model weight: M = W'W + ridge I with W = X Theta.
struct CompressedSystem {
    l: Array2<f64>,
    b: Array1<f64>,
    u: Array1<f64>,
    yty: f64,
    n: usize,
    m: usize,
}

impl CompressedSystem {
    fn build(
        y: ArrayView1<f64>,
        x: ArrayView2<f64>,
        x_new: ArrayView1<f64>,
        theta: &Array2<f64>,
        ridge: f64,
    ) -> Result<Self> {
        let n = y.len();
        let m = theta.ncols();
        if x.nrows() != n || x.ncols() != theta.nrows() || x_new.len() != theta.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "compressed system shapes disagree: y has {n}, X is {}x{}, \
                 x_new has {}, Theta is {}x{m}",
                x.nrows(),
                x.ncols(),
                x_new.len(),
                theta.nrows()
            )));
        }
        let w = x.dot(theta);
        let mut gram = w.t().dot(&w);
        for i in 0..m {
            gram[[i, i]] += ridge;
        }
        let l = cholesky(&gram, "compressed normal equations")?;
        let b = w.t().dot(&y);
        let u = theta.t().dot(&x_new);
        Ok(Self {
            l,
            b,
            u,
            yty: y.dot(&y),
            n,
            m,
        })
    }

    fn mean(&self) -> f64 {
        self.u.dot(&chol_solve(&self.l, self.b.view()))
    }

    fn u_quad(&self) -> f64 {
        chol_quad_form(&self.l, self.u.view())
    }

    fn residual_quad(&self) -> f64 {
        self.yty - chol_quad_form(&self.l, self.b.view())
    }
}

/// Predictive moments of one projection with known noise variance:
/// z | data ~ N(u' M^{-1} b, sigma2 (1 + u' M^{-1} u)).
pub fn bcr_single_predictive(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    x_new: ArrayView1<f64>,
    draw: &ProjectionDraw,
    kappa: f64,
    sigma2: f64,
) -> Result<GaussianPredictive> {
    check_kappa_sigma2(kappa, sigma2)?;
    let sys = CompressedSystem::build(y, x, x_new, &draw.matrix, sigma2 / kappa)?;
    GaussianPredictive::new(sys.mean(), sigma2 * (1.0 + sys.u_quad()))
}

/// Log marginal likelihood of one projection with known noise variance:
/// log N(y | 0, kappa W W' + sigma2 I_n), evaluated through the m x m
/// system (determinant lemma + Woodbury), never the n x n covariance.
pub fn bcr_log_weight(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    draw: &ProjectionDraw,
    kappa: f64,
    sigma2: f64,
) -> Result<f64> {
    check_kappa_sigma2(kappa, sigma2)?;
    let p_prime = x.ncols();
    let zero_new = Array1::<f64>::zeros(p_prime);
    let sys = CompressedSystem::build(y, x, zero_new.view(), &draw.matrix, sigma2 / kappa)?;
    Ok(gaussian_log_weight(&sys, kappa, sigma2))
}

fn gaussian_log_weight(sys: &CompressedSystem, kappa: f64, sigma2: f64) -> f64 {
    let n = sys.n as f64;
    let m = sys.m as f64;
    let log_det = (n - m) * sigma2.ln() + m * kappa.ln() + chol_log_det(&sys.l);
    -0.5 * (n * LN_2PI + log_det + sys.residual_quad() / sigma2)
}

/// Log marginal likelihood with the noise variance integrated out under
/// IG(a0, b0), together with the Student-moment-matched predictive.
fn marginalized_draw(
    sys: &CompressedSystem,
    kappa: f64,
    a0: f64,
    b0: f64,
) -> Result<(f64, f64, f64)> {
    let n = sys.n as f64;
    let a_n = a0 + 0.5 * n;
    let b_n = b0 + 0.5 * sys.residual_quad();
    if !(b_n > 0.0) {
        return Err(Error::NonFinite(format!(
            "posterior inverse-gamma scale must be positive, got {b_n}"
        )));
    }
    let m = sys.m as f64;
    let log_w = -0.5 * n * LN_2PI - 0.5 * (m * kappa.ln() + chol_log_det(&sys.l))
        + a0 * b0.ln()
        - ln_gamma(a0)
        + ln_gamma(a_n)
        - a_n * b_n.ln();
    let mean = sys.mean();
    let var = b_n / (a_n - 1.0) * (1.0 + sys.u_quad());
    Ok((log_w, mean, var))
}

fn check_kappa_sigma2(kappa: f64, sigma2: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive and finite, got {kappa}"
        )));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    Ok(())
}

/// The full K-draw model-averaged predictive, returned as a mixture with
/// normalized weights. Draw k uses an independent substream of
/// `config.seed`, so results do not depend on evaluation order.
pub fn bcr_mixture(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    x_new: ArrayView1<f64>,
    config: &BcrConfig,
    prior: &SpikeSlabPrior,
) -> Result<GaussianMixture> {
    config.validate()?;
    let p_prime = x.ncols();
    let n_rows = x.nrows();
    let kappa = config.kappa.unwrap_or(prior.psi);
    if p_prime == 0 {
        // No nuisance coefficients: the predictive is pure noise.
        let variance = if config.marginalize_sigma2 {
            let a_n = config.ig_shape + 0.5 * n_rows.max(y.len()) as f64;
            let b_n = config.ig_scale + 0.5 * y.dot(&y);
            b_n / (a_n - 1.0)
        } else {
            prior.sigma2
        };
        return GaussianMixture::new(vec![0.0], vec![0.0], vec![variance]);
    }
    let m = config.effective_projection_dim(p_prime, n_rows, prior.lambda);
    let k_draws = config.num_projections;
    let mut log_weights = Vec::with_capacity(k_draws);
    let mut means = Vec::with_capacity(k_draws);
    let mut variances = Vec::with_capacity(k_draws);
    for k in 0..k_draws {
        let mut rng = substream(config.seed, &[labels::BCR_DRAW, k as u64]);
        let draw = sample_projection(p_prime, m, config, &mut rng)?;
        if config.marginalize_sigma2 {
            let sys = CompressedSystem::build(y, x, x_new, &draw.matrix, 1.0 / kappa)?;
            let (lw, mu, var) = marginalized_draw(&sys, kappa, config.ig_shape, config.ig_scale)?;
            log_weights.push(lw);
            means.push(mu);
            variances.push(var);
        } else {
            let sys =
                CompressedSystem::build(y, x, x_new, &draw.matrix, prior.sigma2 / kappa)?;
            log_weights.push(gaussian_log_weight(&sys, kappa, prior.sigma2));
            means.push(sys.mean());
            variances.push(prior.sigma2 * (1.0 + sys.u_quad()));
        }
    }
    GaussianMixture::new(log_weights, means, variances)
}

/// Model-averaged Gaussian predictive: mean is the weighted average of the
/// per-projection means; the variance is the weighted average of component
/// variances by default, or the full mixture variance when configured.
pub fn bcr_predictive(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    x_new: ArrayView1<f64>,
    config: &BcrConfig,
    prior: &SpikeSlabPrior,
) -> Result<GaussianPredictive> {
    let mix = bcr_mixture(y, x, x_new, config, prior)?;
    if config.full_mixture_variance {
        return Ok(mix.moment_matched());
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for k in 0..mix.len() {
        let w = mix.log_weights[k].exp();
        mean += w * mix.means[k];
        var += w * mix.variances[k];
    }
    GaussianPredictive::new(mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, Array1, Array2};
    use rand_distr::StandardNormal;

    fn gaussian_problem(seed: u64, n: usize, p: usize) -> (Array1<f64>, Array2<f64>, Array1<f64>) {
        let mut rng = substream(seed, &[77]);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        let x_new = Array1::from_shape_fn(p, |_| rng.sample::<f64, _>(StandardNormal));
        (y, x, x_new)
    }

    fn identity_draw(p: usize) -> ProjectionDraw {
        ProjectionDraw {
            theta: 0.5,
            matrix: Array2::eye(p),
            log_weight: 0.0,
        }
    }

    #[test]
    fn three_point_frequencies_match_distribution() {
        let theta = 0.3_f64;
        let mut rng = substream(5, &[1]);
        let total = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..total {
            let v = sample_three_point(theta, &mut rng);
            if v < 0.0 {
                counts[0] += 1;
            } else if v > 0.0 {
                counts[1] += 1;
            } else {
                counts[2] += 1;
            }
        }
        let probs = [
            theta * theta,
            (1.0 - theta) * (1.0 - theta),
            2.0 * (1.0 - theta) * theta,
        ];
        for (c, p) in counts.iter().zip(probs.iter()) {
            let se = (p * (1.0 - p) / total as f64).sqrt();
            let freq = *c as f64 / total as f64;
            assert!(
                (freq - p).abs() < 3.0 * se,
                "frequency {freq} too far from {p} (se {se})"
            );
        }
        // Magnitude check: nonzero entries are +-sqrt(1/theta).
        let v = (1.0 / theta).sqrt();
        let mut rng2 = substream(5, &[2]);
        for _ in 0..100 {
            let s = sample_three_point(theta, &mut rng2);
            assert!(s == 0.0 || (s.abs() - v).abs() < 1e-15);
        }
    }

    #[test]
    fn accepted_projections_are_orthonormal() {
        let config = BcrConfig::default();
        for seed in 0..10u64 {
            let mut rng = substream(seed, &[3]);
            let draw = sample_projection(20, 6, &config, &mut rng).unwrap();
            let qtq = draw.matrix.t().dot(&draw.matrix);
            for i in 0..6 {
                for j in 0..6 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (qtq[[i, j]] - expect).abs() < 1e-10,
                        "seed {seed}: Theta'Theta deviates at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn full_dimension_projection_is_orthogonal() {
        let config = BcrConfig::default();
        let mut rng = substream(9, &[4]);
        let p = 7;
        let draw = sample_projection(p, p, &config, &mut rng).unwrap();
        let qqt = draw.matrix.dot(&draw.matrix.t());
        for i in 0..p {
            for j in 0..p {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qqt[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn oversized_projection_dimension_is_rejected() {
        let config = BcrConfig::default();
        let mut rng = substream(0, &[5]);
        assert!(sample_projection(3, 4, &config, &mut rng).is_err());
        assert!(sample_projection(3, 0, &config, &mut rng).is_err());
    }

    #[test]
    fn zero_feature_vector_gives_pure_noise_predictive() {
        let (y, x, _) = gaussian_problem(1, 12, 5);
        let config = BcrConfig::default();
        let mut rng = substream(2, &[6]);
        let draw = sample_projection(5, 3, &config, &mut rng).unwrap();
        let x_new = Array1::<f64>::zeros(5);
        let pred =
            bcr_single_predictive(y.view(), x.view(), x_new.view(), &draw, 2.0, 1.3).unwrap();
        assert_abs_diff_eq!(pred.mean, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pred.variance, 1.3, epsilon = 1e-14);
    }

    #[test]
    fn identity_projection_matches_direct_ridge_computation() {
        // With Theta = I the compressed model is the original conjugate
        // ridge model; compare against an independent direct evaluation of
        // (X'X + (sigma2/kappa) I)^{-1}.
        let (y, x, x_new) = gaussian_problem(3, 15, 4);
        let kappa = 1.7;
        let sigma2 = 0.9;
        let draw = identity_draw(4);
        let pred =
            bcr_single_predictive(y.view(), x.view(), x_new.view(), &draw, kappa, sigma2)
                .unwrap();
        // Direct: invert via solving against the 4 unit vectors.
        let mut m = x.t().dot(&x);
        for i in 0..4 {
            m[[i, i]] += sigma2 / kappa;
        }
        let l = cholesky(&m, "direct").unwrap();
        let b = x.t().dot(&y);
        let coef = chol_solve(&l, b.view());
        let mu = x_new.dot(&coef);
        let tau2 = sigma2 * (1.0 + chol_quad_form(&l, x_new.view()));
        assert_abs_diff_eq!(pred.mean, mu, epsilon = 1e-10);
        assert_abs_diff_eq!(pred.variance, tau2, epsilon = 1e-10);
        assert!(pred.variance > sigma2);
    }

    #[test]
    fn log_weight_matches_dense_covariance_evaluation() {
        let (y, x, _) = gaussian_problem(4, 5, 6);
        let config = BcrConfig::default();
        let mut rng = substream(8, &[7]);
        let draw = sample_projection(6, 2, &config, &mut rng).unwrap();
        let kappa = 2.2;
        let sigma2 = 0.7;
        let lw = bcr_log_weight(y.view(), x.view(), &draw, kappa, sigma2).unwrap();
        // Dense n x n reference: kappa W W' + sigma2 I.
        let w = x.dot(&draw.matrix);
        let mut phi = Array2::<f64>::zeros((5, 5));
        for r in 0..5 {
            for c in 0..5 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += w[[r, k]] * w[[c, k]];
                }
                phi[[r, c]] = kappa * s;
            }
            phi[[r, r]] += sigma2;
        }
        let l = cholesky(&phi, "dense").unwrap();
        let dense =
            -0.5 * (5.0 * LN_2PI + chol_log_det(&l) + chol_quad_form(&l, y.view()));
        assert_abs_diff_eq!(lw, dense, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_kappa_collapses_to_noise_only_evidence() {
        let (y, x, _) = gaussian_problem(6, 10, 4);
        let config = BcrConfig::default();
        let mut rng = substream(4, &[8]);
        let draw = sample_projection(4, 2, &config, &mut rng).unwrap();
        let sigma2 = 1.4;
        let lw = bcr_log_weight(y.view(), x.view(), &draw, 1e-13, sigma2).unwrap();
        let n = y.len() as f64;
        let noise_only = -0.5 * (n * (LN_2PI + sigma2.ln()) + y.dot(&y) / sigma2);
        assert!(
            (lw - noise_only).abs() < 1e-6 * noise_only.abs(),
            "kappa -> 0 limit violated: {lw} vs {noise_only}"
        );
    }

    #[test]
    fn mixture_weights_sum_to_one_and_k1_matches_single() {
        let (y, x, x_new) = gaussian_problem(10, 20, 6);
        let prior = SpikeSlabPrior::new(0.4, 2.0, 1.1).unwrap();
        let config = BcrConfig {
            projection_dim: Some(3),
            num_projections: 7,
            seed: 11,
            ..BcrConfig::default()
        };
        let mix = bcr_mixture(y.view(), x.view(), x_new.view(), &config, &prior).unwrap();
        assert_eq!(mix.len(), 7);
        let total: f64 = mix.log_weights.iter().map(|lw| lw.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

        let single_config = BcrConfig {
            num_projections: 1,
            ..config
        };
        let avg =
            bcr_predictive(y.view(), x.view(), x_new.view(), &single_config, &prior).unwrap();
        let mut rng = substream(11, &[labels::BCR_DRAW, 0]);
        let draw = sample_projection(6, 3, &single_config, &mut rng).unwrap();
        let direct = bcr_single_predictive(
            y.view(),
            x.view(),
            x_new.view(),
            &draw,
            prior.psi,
            prior.sigma2,
        )
        .unwrap();
        assert_abs_diff_eq!(avg.mean, direct.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.variance, direct.variance, epsilon = 1e-12);
    }

    #[test]
    fn averaged_variance_defaults_to_component_average() {
        let (y, x, x_new) = gaussian_problem(12, 18, 5);
        let prior = SpikeSlabPrior::new(0.3, 3.0, 0.8).unwrap();
        let base = BcrConfig {
            projection_dim: Some(2),
            num_projections: 5,
            seed: 21,
            ..BcrConfig::default()
        };
        let mix = bcr_mixture(y.view(), x.view(), x_new.view(), &base, &prior).unwrap();
        let pred = bcr_predictive(y.view(), x.view(), x_new.view(), &base, &prior).unwrap();
        let mut mean = 0.0;
        let mut var = 0.0;
        for k in 0..mix.len() {
            let w = mix.log_weights[k].exp();
            mean += w * mix.means[k];
            var += w * mix.variances[k];
        }
        assert_abs_diff_eq!(pred.mean, mean, epsilon = 1e-13);
        assert_abs_diff_eq!(pred.variance, var, epsilon = 1e-13);

        let full = BcrConfig {
            full_mixture_variance: true,
            ..base
        };
        let pred_full = bcr_predictive(y.view(), x.view(), x_new.view(), &full, &prior).unwrap();
        assert!(pred_full.variance >= pred.variance - 1e-13);
        assert_abs_diff_eq!(pred_full.variance, mix.moment_matched().variance, epsilon = 1e-13);
    }

    #[test]
    fn predictive_is_deterministic_given_seed() {
        let (y, x, x_new) = gaussian_problem(14, 25, 8);
        let prior = SpikeSlabPrior::new(0.25, 1.5, 1.0).unwrap();
        let config = BcrConfig {
            projection_dim: Some(4),
            num_projections: 6,
            seed: 99,
            ..BcrConfig::default()
        };
        let a = bcr_predictive(y.view(), x.view(), x_new.view(), &config, &prior).unwrap();
        let b = bcr_predictive(y.view(), x.view(), x_new.view(), &config, &prior).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
    }

    #[test]
    fn empty_design_predictive_is_pure_noise() {
        let y = arr1(&[0.5, -1.0, 2.0]);
        let x = Array2::<f64>::zeros((3, 0));
        let x_new = Array1::<f64>::zeros(0);
        let prior = SpikeSlabPrior::new(0.5, 2.0, 1.6).unwrap();
        let config = BcrConfig::default();
        let pred = bcr_predictive(y.view(), x.view(), x_new.view(), &config, &prior).unwrap();
        assert_eq!(pred.mean, 0.0);
        assert_abs_diff_eq!(pred.variance, 1.6, epsilon = 1e-14);
    }

    #[test]
    fn marginalized_variant_is_finite_and_consistent() {
        let (y, x, x_new) = gaussian_problem(16, 30, 6);
        let prior = SpikeSlabPrior::new(0.3, 2.0, 1.0).unwrap();
        let config = BcrConfig {
            projection_dim: Some(3),
            num_projections: 4,
            seed: 5,
            marginalize_sigma2: true,
            ..BcrConfig::default()
        };
        let pred = bcr_predictive(y.view(), x.view(), x_new.view(), &config, &prior).unwrap();
        assert!(pred.variance.is_finite() && pred.variance > 0.0);
        // Shape at the boundary is rejected.
        let bad = BcrConfig {
            ig_shape: 1.0,
            ..config
        };
        assert!(bcr_predictive(y.view(), x.view(), x_new.view(), &bad, &prior).is_err());
    }

    #[test]
    fn invalid_scalars_are_rejected() {
        let (y, x, x_new) = gaussian_problem(17, 8, 3);
        let draw = identity_draw(3);
        assert!(
            bcr_single_predictive(y.view(), x.view(), x_new.view(), &draw, 0.0, 1.0).is_err()
        );
        assert!(
            bcr_single_predictive(y.view(), x.view(), x_new.view(), &draw, 1.0, -1.0).is_err()
        );
        assert!(bcr_log_weight(y.view(), x.view(), &draw, f64::NAN, 1.0).is_err());
    }
}
