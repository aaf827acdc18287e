use nalgebra::{DMatrix, DVector};

use super::Chain;
use crate::error::{Error, Result};

/// Gaussian approximation `N(mean, cov)` of the parameter posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower factor with `chol chol^T = cov`.
    pub chol: DMatrix<f64>,
}

impl SurrogatePosterior {
    /// Factors `cov`, adding growing diagonal jitter until it is positive definite.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite surrogate moments".into()));
        }
        let cov = 0.5 * (&cov + cov.transpose());
        let scale = (cov.trace() / d.max(1) as f64).max(1e-12);
        let mut jitter = 0.0;
        for attempt in 0..12 {
            let trial = &cov + DMatrix::identity(d, d) * jitter;
            if let Some(ch) = trial.clone().cholesky() {
                return Ok(Self { mean, cov: trial, chol: ch.unpack() });
            }
            jitter = scale * 1e-10 * 10f64.powi(attempt);
        }
        Err(Error::NotPositiveDefinite { which: "surrogate covariance", pivot: 0 })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density up to a constant.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                s -= self.chol[(i, j)] * zj;
            }
            z[i] = s / self.chol[(i, i)];
        }
        -0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    /// Marginal standard deviations.
    pub fn sd(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Fits the surrogate to a chain after dropping `burn_frac` and thinning to at most `thin_to` rows.
pub fn fit_surrogate(chain: &Chain, burn_frac: f64, thin_to: usize) -> Result<SurrogatePosterior> {
    let d = chain.dim();
    let burn = ((chain.len() as f64) * burn_frac.clamp(0.0, 1.0)).floor() as usize;
    let kept = chain.len() - burn.min(chain.len());
    let needed = 10 * d;
    if kept < needed || kept == 0 {
        return Err(Error::TooFewSamples { needed, have: kept });
    }
    let stride = kept.div_ceil(thin_to.max(1)).max(1);
    let rows: Vec<&[f64]> = (burn..chain.len()).step_by(stride).map(|i| chain.sample(i)).collect();
    let n = rows.len() as f64;
    let mut mean = DVector::zeros(d);
    for r in &rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for r in &rows {
        let c = DVector::from_column_slice(r) - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    SurrogatePosterior::new(mean, cov)
}
