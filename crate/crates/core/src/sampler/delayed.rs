use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{accept, Chain, LogDensity, StepFlags, SurrogatePosterior};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// `theta + chol (eps z)` with `z` standard normal.
pub fn propose_correlated(theta: &[f64], surrogate: &SurrogatePosterior, eps: f64, rng: &mut SimRng) -> Vec<f64> {
    let d = theta.len();
    let z: Vec<f64> = (0..d).map(|_| eps * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut out = theta.to_vec();
    for i in 0..d {
        for (j, zj) in z.iter().enumerate().take(i + 1) {
            out[i] += surrogate.chol[(i, j)] * zj;
        }
    }
    out
}

/// Delayed-acceptance Metropolis.
///
/// Proposals are screened against the surrogate first; the expensive
/// target is evaluated only for survivors and the second stage corrects
/// for the surrogate so the chain targets `target` exactly.
pub fn da_mh<T: LogDensity + ?Sized>(
    target: &T,
    surrogate: &SurrogatePosterior,
    theta0: &[f64],
    n: usize,
    eps: f64,
    rng: &mut SimRng,
) -> Result<Chain> {
    let d = theta0.len();
    if surrogate.dim() != d {
        return Err(Error::DimensionMismatch { expected: surrogate.dim(), got: d });
    }
    let mut x = theta0.to_vec();
    let mut lp = target.log_density(&x);
    let mut lq = surrogate.log_density(&x);
    if !lp.is_finite() || !lq.is_finite() {
        return Err(Error::InvalidStart);
    }
    let mut chain = Chain::with_capacity(d, n);
    let start = Instant::now();
    for _ in 0..n {
        let prop = propose_correlated(&x, surrogate, eps, rng);
        let lq_new = surrogate.log_density(&prop);
        let stage1 = accept(lq_new - lq, rng.random());
        let mut stage2 = false;
        if stage1 {
            let lp_new = target.log_density(&prop);
            chain.expensive_evals += 1;
            stage2 = accept((lp_new - lp) - (lq_new - lq), rng.random());
            if stage2 {
                x = prop;
                lp = lp_new;
                lq = lq_new;
            }
        }
        chain.push(&x, StepFlags { coord: None, stage1, stage2 });
    }
    chain.wall_time = start.elapsed().as_secs_f64();
    Ok(chain)
}
