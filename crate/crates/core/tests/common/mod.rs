#![allow(dead_code)]

use rand::Rng;
use swmc::model::{simulate, InitialScale, LagSampler, ModelKind, Prior, PriorSpec, Simulation, Theta};
use swmc::oracle::dense_conditional_moments;
use swmc::precision::log_posterior;
use swmc::recursive::{filter_series, recursive_log_likelihood};
use swmc::rng::SimRng;

/// Flat priors wide enough never to bind.
pub fn wide_priors(kind: ModelKind) -> PriorSpec {
    let priors = (0..kind.param_dim())
        .map(|i| {
            if kind.is_log_coord(i) {
                Prior::LogFlat { lo: 1e-300, hi: 1e300 }
            } else {
                Prior::Uniform { lo: -10.0, hi: 10.0 }
            }
        })
        .collect();
    PriorSpec::new(kind, priors).unwrap()
}

fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn random_theta(kind: ModelKind, rng: &mut SimRng) -> Theta {
    let values = match kind {
        ModelKind::Linear => vec![
            rng.random_range(-0.95..0.95),
            log_uniform(rng, 0.1, 2.0),
            log_uniform(rng, 0.1, 2.0),
        ],
        ModelKind::Ou1d => vec![log_uniform(rng, 0.1, 2.0), log_uniform(rng, 0.05, 2.0), log_uniform(rng, 0.1, 2.0)],
        ModelKind::Ou2d => vec![
            log_uniform(rng, 0.005, 0.5),
            log_uniform(rng, 0.1, 1.0),
            log_uniform(rng, 0.001, 0.1),
            log_uniform(rng, 0.05, 0.5),
            log_uniform(rng, 0.1, 0.5),
        ],
    };
    kind.theta_from_values(&values).unwrap()
}

pub fn lags_for(kind: ModelKind) -> LagSampler {
    match kind {
        ModelKind::Linear => LagSampler::Constant(1.0),
        ModelKind::Ou1d => LagSampler::InverseGamma { alpha: 2.0, beta: 0.1 },
        ModelKind::Ou2d => LagSampler::InverseGamma { alpha: 3.0, beta: 2.0 },
    }
}

/// Simulated data starting near the origin; inference still uses the default diffuse prior.
pub fn simulate_for(theta: &Theta, n: usize, seed: u64) -> Simulation {
    let kind = theta.kind();
    let start = InitialScale { position: Some(1.0), velocity: None };
    let start = if kind == ModelKind::Linear { InitialScale::default() } else { start };
    simulate(theta, n, &lags_for(kind), &start, 1, seed).unwrap()
}

/// Largest deviations between the recursive and dense paths for one `theta`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathDiffs {
    pub moments: f64,
    /// batch minus recursive log-likelihood
    pub batch_offset: f64,
    /// dense minus recursive log-likelihood
    pub dense_offset: f64,
}

pub fn path_diffs(theta: &Theta, n: usize, seed: u64) -> PathDiffs {
    let kind = theta.kind();
    let init = InitialScale::default();
    let sim = simulate_for(theta, n, seed);
    let y = &sim.series;
    let rec = filter_series(theta, y, &init).unwrap();
    let dense = dense_conditional_moments(theta, y.grid(), &init, y.axis(0)).unwrap();
    let mut worst: f64 = 0.0;
    for (step, (f, filt)) in rec[0].iter().zip(dense.forecast.iter().zip(&dense.filtered)) {
        worst = worst
            .max((&step.forecast.mean - &f.mean).abs().max())
            .max((&step.forecast.cov - &f.cov).abs().max())
            .max((&step.filtered.mean - &filt.mean).abs().max())
            .max((&step.filtered.cov - &filt.cov).abs().max());
    }
    let priors = wide_priors(kind);
    let r = recursive_log_likelihood(theta, y, &priors, &init).unwrap();
    let b = log_posterior(theta, y, &priors, &init).unwrap();
    PathDiffs {
        moments: worst,
        batch_offset: b.value - r.value,
        dense_offset: (dense.log_density + r.log_prior) - r.value,
    }
}
