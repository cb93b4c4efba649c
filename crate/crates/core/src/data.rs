//! Regression data container and standardization.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A regression problem: response `y` (length n), design `x` (n x p), and
/// the standardization metadata needed to map back to the original scale.
///
/// A freshly constructed `Dataset` is unstandardized (identity metadata).
/// [`Dataset::standardize`] centers and scales every column of `x` and `y`
/// to sample mean 0 and sample standard deviation 1, recording the applied
/// means and scales.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Array1<f64>,
    pub x: Array2<f64>,
    /// Per-column means subtracted from `x` (zeros when unstandardized).
    pub column_means: Array1<f64>,
    /// Per-column scales dividing `x` (ones when unstandardized).
    pub column_scales: Array1<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    pub standardized: bool,
}

impl Dataset {
    /// Build an unstandardized dataset, validating shape and finiteness.
    pub fn new(y: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        let n = y.len();
        let p = x.ncols();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {} rows but x has {}",
                n,
                x.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidParameter(
                "need at least one feature column".to_string(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector".to_string()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".to_string()));
        }
        Ok(Self {
            y,
            x,
            column_means: Array1::zeros(p),
            column_scales: Array1::ones(p),
            y_mean: 0.0,
            y_scale: 1.0,
            standardized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Center and scale every feature column and the response to sample
    /// mean 0 and sample standard deviation 1 (denominator n - 1).
    ///
    /// Idempotent: standardizing an already-standardized dataset returns a
    /// clone. Constant columns and a constant response are rejected.
    pub fn standardize(&self) -> Result<Dataset> {
        if self.standardized {
            return Ok(self.clone());
        }
        let n = self.n();
        let p = self.p();
        let denom = (n - 1) as f64;

        let mut x = self.x.clone();
        let mut means = Array1::<f64>::zeros(p);
        let mut scales = Array1::<f64>::ones(p);
        for j in 0..p {
            let col = self.x.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / denom;
            if var <= 0.0 {
                return Err(Error::ConstantColumn { index: j });
            }
            let sd = var.sqrt();
            means[j] = mean;
            scales[j] = sd;
            for i in 0..n {
                x[[i, j]] = (self.x[[i, j]] - mean) / sd;
            }
        }

        let y_mean = self.y.sum() / n as f64;
        let y_var = self
            .y
            .iter()
            .map(|v| (v - y_mean) * (v - y_mean))
            .sum::<f64>()
            / denom;
        if y_var <= 0.0 {
            return Err(Error::ConstantResponse);
        }
        let y_scale = y_var.sqrt();
        let y = self.y.mapv(|v| (v - y_mean) / y_scale);

        Ok(Dataset {
            y,
            x,
            column_means: means,
            column_scales: scales,
            y_mean,
            y_scale,
            standardized: true,
        })
    }

    /// Undo standardization using the stored means and scales, recovering
    /// the original data up to floating-point round-off.
    pub fn restore(&self) -> Dataset {
        if !self.standardized {
            return self.clone();
        }
        let n = self.n();
        let p = self.p();
        let mut x = self.x.clone();
        for j in 0..p {
            for i in 0..n {
                x[[i, j]] = self.x[[i, j]] * self.column_scales[j] + self.column_means[j];
            }
        }
        let y = self.y.mapv(|v| v * self.y_scale + self.y_mean);
        Dataset {
            y,
            x,
            column_means: Array1::zeros(p),
            column_scales: Array1::ones(p),
            y_mean: 0.0,
            y_scale: 1.0,
            standardized: false,
        }
    }
}
