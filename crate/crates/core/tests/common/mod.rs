//! Shared helpers for integration tests: an adaptive-quadrature oracle
//! for Gaussian-mixture moments and seeded dataset builders.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use spikeslab::data::Dataset;
use spikeslab::rng::substream;

/// Adaptive Simpson quadrature with Richardson acceptance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Numerically integrated moments of the integrand
/// g(b) = N(obs | coef * b, noise_var) * N(b | 0, slab_var):
/// the normalizer (the slab-marginal density of the observation) and the
/// first two normalized moments of b.
pub struct SlabQuadrature {
    pub marginal: f64,
    pub mean: f64,
    pub second: f64,
}

pub fn slab_moments_by_quadrature(
    obs: f64,
    coef: f64,
    noise_var: f64,
    slab_var: f64,
) -> SlabQuadrature {
    let normal = |x: f64, var: f64| (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let g = move |b: f64| normal(obs - coef * b, noise_var) * normal(b, slab_var);
    // The integrand is a Gaussian centered on the conjugate posterior
    // mean; cover it (and the prior) with a generous window.
    let post_var = slab_var * noise_var / (coef * coef * slab_var + noise_var);
    let post_mean = coef * slab_var * obs / (coef * coef * slab_var + noise_var);
    let spread = post_var.sqrt().max(slab_var.sqrt());
    let lo = post_mean - 14.0 * spread;
    let hi = post_mean + 14.0 * spread;
    let peak = g(post_mean).max(1e-280);
    let tol = peak * spread * 1e-12;
    let marginal = adaptive_simpson(&g, lo, hi, tol);
    let mean = adaptive_simpson(&|b| b * g(b), lo, hi, tol) / marginal;
    let second = adaptive_simpson(&|b| b * b * g(b), lo, hi, tol) / marginal;
    SlabQuadrature {
        marginal,
        mean,
        second,
    }
}

/// Standard-normal density helper for test-side closed forms.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Seeded dense dataset with a sparse strong signal, unstandardized.
pub fn signal_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = substream(seed, &[0x7465_7374]);
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let mut beta = Array1::<f64>::zeros(p);
    beta[0] = 2.0;
    if p > 2 {
        beta[2] = -1.5;
    }
    let noise = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let y = x.dot(&beta) + &noise;
    Dataset::new(y, x).unwrap()
}

/// Sample mean and variance (denominator n - 1).
pub fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
