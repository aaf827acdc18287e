//! Dense conditional moments used to check the recursions.
//!
//! With `Sigma_YY = L L^T` and `z = L^-1 y`, the forecast of observation
//! block `t` has mean `L[t, :t] z[:t]` and covariance `L[t,t] L[t,t]^T`. The
//! filtered state at `t` uses `Cov(X_t, Y_1:t) = Sigma_XX[t, :t]`.

use nalgebra::{DMatrix, DVector};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{simulate, InitialScale, LagSampler, ModelKind, Prior, PriorSpec, Theta, TimeGrid};
use crate::precision::{dense_oracle_covariance, dense_state_covariance, log_posterior, DENSE_LIMIT};
use crate::recursive::{filter_series, recursive_log_likelihood, StateMoments};
use crate::rng::{substream, SimRng};
use crate::series::ObservationSeries;

/// Dense forecast and filtered moments for one axis of observations.
#[derive(Debug, Clone)]
pub struct DenseMoments {
    pub forecast: Vec<StateMoments>,
    pub filtered: Vec<StateMoments>,
    /// Log density of the whole axis under `N(0, Sigma_YY)`.
    pub log_density: f64,
}

pub fn dense_conditional_moments(theta: &Theta, grid: &TimeGrid, init: &InitialScale, y: &[f64]) -> Result<DenseMoments> {
    let d = theta.kind().state_dim();
    let n = grid.len();
    let m = n * d;
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    let syy = dense_oracle_covariance(theta, grid, init)?;
    let sxx = dense_state_covariance(theta, grid, init)?;
    let l = syy
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { which: "dense Sigma_YY", pivot: 0 })?
        .unpack();
    let yv = DVector::from_column_slice(y);
    let z = l.solve_lower_triangular(&yv).ok_or(Error::NotPositiveDefinite { which: "dense factor", pivot: 0 })?;

    let log_density = -0.5 * z.norm_squared()
        - l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
        - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();

    let mut forecast = Vec::with_capacity(n);
    let mut filtered = Vec::with_capacity(n);
    for t in 0..n {
        let r0 = t * d;
        let mean = l.view((r0, 0), (d, r0)) * z.rows(0, r0);
        let ltt = l.view((r0, r0), (d, d));
        forecast.push(StateMoments { mean, cov: ltt * ltt.transpose() });

        let p = r0 + d;
        let lp = l.view((0, 0), (p, p)).clone_owned();
        let c_t: DMatrix<f64> = sxx.view((0, r0), (p, d)).clone_owned();
        let u = lp.solve_lower_triangular(&c_t).ok_or(Error::NotPositiveDefinite { which: "dense prefix", pivot: t })?;
        let mean = u.transpose() * z.rows(0, p);
        let cov = sxx.view((r0, r0), (d, d)) - u.transpose() * &u;
        filtered.push(StateMoments { mean, cov });
    }
    Ok(DenseMoments { forecast, filtered, log_density })
}

/// Recursive-versus-dense comparison for one parameter draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDiff {
    /// Largest absolute difference over forecast and filtered moments, all axes.
    pub moments: f64,
    /// Batch minus recursive log-likelihood.
    pub batch_offset: f64,
    /// Dense minus recursive log-likelihood.
    pub dense_offset: f64,
}

/// Compares the three likelihood paths and the two moment paths on `y`.
pub fn compare_paths(theta: &Theta, y: &ObservationSeries, init: &InitialScale) -> Result<TrialDiff> {
    let priors = flat_priors(theta.kind());
    let rec = filter_series(theta, y, init)?;
    let mut moments: f64 = 0.0;
    let mut dense_ll = 0.0;
    for (a, steps) in rec.iter().enumerate() {
        let dense = dense_conditional_moments(theta, y.grid(), init, y.axis(a))?;
        dense_ll += dense.log_density;
        for (s, (f, p)) in steps.iter().zip(dense.forecast.iter().zip(&dense.filtered)) {
            moments = moments
                .max((&s.forecast.mean - &f.mean).amax())
                .max((&s.forecast.cov - &f.cov).amax())
                .max((&s.filtered.mean - &p.mean).amax())
                .max((&s.filtered.cov - &p.cov).amax());
        }
    }
    let r = recursive_log_likelihood(theta, y, &priors, init)?.log_likelihood();
    let b = log_posterior(theta, y, &priors, init)?.log_likelihood();
    Ok(TrialDiff { moments, batch_offset: b - r, dense_offset: dense_ll - r })
}

fn flat_priors(kind: ModelKind) -> PriorSpec {
    let priors = (0..kind.param_dim())
        .map(|i| if kind.is_log_coord(i) { Prior::LogFlat { lo: 1e-300, hi: 1e300 } } else { Prior::Uniform { lo: -10.0, hi: 10.0 } })
        .collect();
    PriorSpec::new(kind, priors).expect("valid flat priors")
}

/// A parameter draw from a box of well-conditioned values for `kind`.
pub fn random_theta(kind: ModelKind, rng: &mut SimRng) -> Theta {
    let mut lu = |lo: f64, hi: f64| rng.random_range(lo.ln()..hi.ln()).exp();
    let values = match kind {
        ModelKind::Linear => {
            let (t, s) = (lu(0.1, 2.0), lu(0.1, 2.0));
            vec![rng.random_range(-0.95..0.95), t, s]
        }
        ModelKind::Ou1d => vec![lu(0.1, 2.0), lu(0.05, 2.0), lu(0.1, 2.0)],
        ModelKind::Ou2d => vec![lu(0.005, 0.5), lu(0.1, 1.0), lu(0.001, 0.1), lu(0.05, 0.5), lu(0.1, 0.5)],
    };
    kind.theta_from_values(&values).expect("positive draws")
}

/// `trials` random draws, each compared on its own simulated series of length `n`.
///
/// Draw `i` takes its parameters from stream `i` of `seed` and its data from seed `seed + i`.
pub fn equivalence_trials(kind: ModelKind, n: usize, trials: usize, seed: u64) -> Result<Vec<TrialDiff>> {
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { n, limit: DENSE_LIMIT });
    }
    let lags = match kind {
        ModelKind::Linear => LagSampler::Constant(1.0),
        ModelKind::Ou1d => LagSampler::InverseGamma { alpha: 2.0, beta: 0.1 },
        ModelKind::Ou2d => LagSampler::InverseGamma { alpha: 3.0, beta: 2.0 },
    };
    let start = if kind == ModelKind::Linear { InitialScale::default() } else { InitialScale::fixed(1.0) };
    (0..trials)
        .map(|i| {
            let th = random_theta(kind, &mut substream(seed, i as u64));
            let sim = simulate(&th, n, &lags, &start, 1, seed.wrapping_add(i as u64))?;
            compare_paths(&th, &sim.series, &InitialScale::default())
        })
        .collect()
}
