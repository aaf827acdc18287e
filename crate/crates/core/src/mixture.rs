//! Equal-weight Gaussian mixtures of conditional state moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{InitialScale, ModelKind};
use crate::precision::PrecisionFactorization;
use crate::recursive::{filter_series, StateMoments};
use crate::rng::SimRng;
use crate::series::ObservationSeries;

/// Mixture summary of the state at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n_components: usize,
    /// Index of the source observation.
    pub t: usize,
    pub timestamp: f64,
}

impl StateEstimate {
    pub fn at(mut self, t: usize, timestamp: f64) -> Self {
        self.t = t;
        self.timestamp = timestamp;
        self
    }

    pub fn sd(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Law-of-total-variance reduction of equally weighted components.
pub fn mixture_moments(components: &[StateMoments]) -> Result<StateEstimate> {
    let first = components.first().ok_or(Error::EmptyMixture)?;
    let d = first.dim();
    let n = components.len() as f64;
    let mut mean = DVector::zeros(d);
    for c in components {
        if c.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
        }
        mean += &c.mean;
    }
    mean /= n;
    // average within-component covariance plus covariance of the means
    let mut cov = DMatrix::zeros(d, d);
    for c in components {
        let dev = &c.mean - &mean;
        cov += &c.cov + &dev * dev.transpose();
    }
    cov /= n;
    Ok(StateEstimate { mean, cov, n_components: components.len(), t: 0, timestamp: f64::NAN })
}

/// One joint draw of the states of `axis`, `L^-T (W + z)`, for given standard-normal `z`.
pub fn batch_state_draw_with(fact: &PrecisionFactorization, axis: usize, z: &[f64]) -> Result<Vec<f64>> {
    let w = fact
        .w
        .get(axis)
        .ok_or_else(|| Error::InvalidParameter("factorization has not been whitened against data".into()))?;
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: z.len() });
    }
    let shifted: Vec<f64> = w.iter().zip(z).map(|(a, b)| a + b).collect();
    Ok(fact.l.solve_upper(&shifted))
}

/// One exact joint posterior draw of the states of `axis`.
pub fn batch_state_draw(fact: &PrecisionFactorization, axis: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..fact.dim()).map(|_| rng.sample(StandardNormal)).collect();
    batch_state_draw_with(fact, axis, &z)
}

/// Mixture estimate of the state at every time point, one component per parameter row.
///
/// Components run in parallel; the reduction order is fixed, so results
/// do not depend on the thread count.
pub fn posterior_state_sweep(
    kind: ModelKind,
    thetas: &[Vec<f64>],
    y: &ObservationSeries,
    init: &InitialScale,
) -> Result<Vec<StateEstimate>> {
    if thetas.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let per_theta: Vec<Vec<StateMoments>> = thetas
        .par_iter()
        .map(|c| {
            let th = kind.theta_from_coords(c)?;
            let trace = filter_series(&th, y, init)?;
            Ok((0..y.len())
                .map(|t| {
                    let parts: Vec<StateMoments> = trace.iter().map(|axis| axis[t].filtered.clone()).collect();
                    StateMoments::concat(&parts)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    (0..y.len())
        .map(|t| {
            let comps: Vec<StateMoments> = per_theta.iter().map(|p| p[t].clone()).collect();
            Ok(mixture_moments(&comps)?.at(t, y.grid().time(t)))
        })
        .collect()
}
