//! Random-walk samplers: self-tuning one-coordinate Metropolis and
//! delayed-acceptance Metropolis with a Gaussian surrogate.

mod chain;
mod delayed;
mod surrogate;
mod tuning;

pub use chain::{Chain, StepFlags};
pub use delayed::{da_mh, propose_correlated};
pub use surrogate::{fit_surrogate, SurrogatePosterior};
pub use tuning::{continue_tuning, self_tuning_rwm, tune_step, StepSizeState, TuningConfig};

/// A log-density on sampler coordinates; `-inf` marks zero density.
pub trait LogDensity {
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> LogDensity for F {
    fn log_density(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Metropolis acceptance for a log ratio, with `u` uniform on `[0, 1)`.
pub(crate) fn accept(log_ratio: f64, u: f64) -> bool {
    if log_ratio >= 0.0 {
        true
    } else if log_ratio.is_nan() {
        false
    } else {
        u < log_ratio.exp()
    }
}

/// Plain random-walk Metropolis with an isotropic Gaussian proposal of sd `step`.
///
/// Used as the reference chain when checking delayed acceptance.
pub fn plain_rwm<T: LogDensity + ?Sized>(
    target: &T,
    theta0: &[f64],
    n: usize,
    step: &[f64],
    rng: &mut crate::rng::SimRng,
) -> crate::Result<Chain> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let mut x = theta0.to_vec();
    let mut lp = target.log_density(&x);
    if !lp.is_finite() {
        return Err(crate::Error::InvalidStart);
    }
    let mut chain = Chain::with_capacity(x.len(), n);
    let start = std::time::Instant::now();
    let mut prop = x.clone();
    for _ in 0..n {
        for (i, p) in prop.iter_mut().enumerate() {
            *p = x[i] + step[i] * rng.sample::<f64, _>(StandardNormal);
        }
        let lp_new = target.log_density(&prop);
        chain.expensive_evals += 1;
        let ok = accept(lp_new - lp, rng.random());
        if ok {
            x.copy_from_slice(&prop);
            lp = lp_new;
        }
        chain.push(&x, StepFlags { coord: None, stage1: ok, stage2: ok });
    }
    chain.wall_time = start.elapsed().as_secs_f64();
    Ok(chain)
}
