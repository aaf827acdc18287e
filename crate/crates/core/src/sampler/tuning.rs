use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{accept, Chain, LogDensity, StepFlags};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Settings of the phase-one sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    /// Target acceptance rate per coordinate.
    pub alpha_target: f64,
    /// Downward log step on rejection; the upward step is `(1 - alpha) / alpha * b`.
    pub b: f64,
    /// Starting proposal sd for every coordinate.
    pub initial_step: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { alpha_target: 0.44, b: 0.1, initial_step: 0.1 }
    }
}

/// Per-coordinate proposal sds and their increments.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeState {
    pub s: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub alpha_target: f64,
}

impl StepSizeState {
    pub fn new(dim: usize, cfg: &TuningConfig) -> Result<Self> {
        let alpha = cfg.alpha_target;
        if !(alpha > 0.0 && alpha < 1.0) || !(cfg.b > 0.0) || !(cfg.initial_step > 0.0) {
            return Err(Error::InvalidParameter(format!("bad tuning settings {cfg:?}")));
        }
        Ok(Self { s: vec![cfg.initial_step; dim], a: (1.0 - alpha) / alpha * cfg.b, b: cfg.b, alpha_target: alpha })
    }
}

/// Grows `s` by `e^a` after an acceptance, shrinks it by `e^b` after a rejection.
pub fn tune_step(s: f64, accepted: bool, a: f64, b: f64) -> f64 {
    if accepted {
        s * a.exp()
    } else {
        s / b.exp()
    }
}

/// One-coordinate-at-a-time random-walk Metropolis with self-tuned step sizes.
///
/// Each iteration picks a coordinate uniformly, proposes `N(x_i, s_i^2)`,
/// and tunes `s_i` on the outcome. Adaptation never stops.
pub fn self_tuning_rwm<T: LogDensity + ?Sized>(
    target: &T,
    theta0: &[f64],
    n: usize,
    cfg: &TuningConfig,
    rng: &mut SimRng,
) -> Result<(Chain, StepSizeState)> {
    let mut steps = StepSizeState::new(theta0.len(), cfg)?;
    let chain = continue_tuning(target, theta0, n, &mut steps, rng)?;
    Ok((chain, steps))
}

/// Runs [`self_tuning_rwm`] from existing step sizes, updating them in place.
pub fn continue_tuning<T: LogDensity + ?Sized>(
    target: &T,
    theta0: &[f64],
    n: usize,
    steps: &mut StepSizeState,
    rng: &mut SimRng,
) -> Result<Chain> {
    let dim = theta0.len();
    if steps.s.len() != dim {
        return Err(Error::DimensionMismatch { expected: steps.s.len(), got: dim });
    }
    let mut x = theta0.to_vec();
    let mut lp = target.log_density(&x);
    if !lp.is_finite() {
        return Err(Error::InvalidStart);
    }
    let mut chain = Chain::with_capacity(dim, n);
    let start = Instant::now();
    for _ in 0..n {
        let i = rng.random_range(0..dim);
        let old = x[i];
        x[i] = old + steps.s[i] * rng.sample::<f64, _>(StandardNormal);
        let lp_new = target.log_density(&x);
        chain.expensive_evals += 1;
        let ok = accept(lp_new - lp, rng.random());
        if ok {
            lp = lp_new;
        } else {
            x[i] = old;
        }
        steps.s[i] = tune_step(steps.s[i], ok, steps.a, steps.b);
        chain.push(&x, StepFlags { coord: Some(i), stage1: ok, stage2: ok });
    }
    chain.wall_time = start.elapsed().as_secs_f64();
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn increments_follow_target_rate() {
        let st = StepSizeState::new(3, &TuningConfig { alpha_target: 0.44, b: 0.1, initial_step: 1.0 }).unwrap();
        assert_relative_eq!(st.a, 0.56 / 0.44 * 0.1, epsilon = 1e-15);
        assert_relative_eq!(st.a, 0.127273, epsilon = 1e-6);
        assert_relative_eq!(tune_step(1.0, true, st.a, st.b), (0.56f64 / 0.44 * 0.1).exp(), epsilon = 1e-15);
        // the six-digit reference value 1.135732 is off by 5e-6 from e^0.127273
        assert_relative_eq!(tune_step(1.0, true, st.a, st.b), 1.135732, epsilon = 1e-5);
        assert_relative_eq!(tune_step(1.0, false, st.a, st.b), 0.904837, epsilon = 1e-6);

        let half = StepSizeState::new(1, &TuningConfig { alpha_target: 0.5, ..Default::default() }).unwrap();
        assert_relative_eq!(half.a, half.b, epsilon = 1e-15);
    }

    #[test]
    fn zero_drift_at_target_rate() {
        // E[d ln s] = alpha a - (1 - alpha) b = 0
        let st = StepSizeState::new(1, &TuningConfig::default()).unwrap();
        let drift = st.alpha_target * st.a - (1.0 - st.alpha_target) * st.b;
        assert!(drift.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_settings_and_start() {
        assert!(StepSizeState::new(2, &TuningConfig { alpha_target: 1.0, ..Default::default() }).is_err());
        let target = |x: &[f64]| if x[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let r = self_tuning_rwm(&target, &[-1.0], 10, &TuningConfig::default(), &mut rng_from_seed(1));
        assert_eq!(r.unwrap_err(), Error::InvalidStart);
    }

    #[test]
    fn empty_run_gives_empty_chain() {
        let target = |x: &[f64]| -0.5 * x[0] * x[0];
        let (chain, _) = self_tuning_rwm(&target, &[0.0], 0, &TuningConfig::default(), &mut rng_from_seed(1)).unwrap();
        assert!(chain.is_empty());
        assert!(super::super::fit_surrogate(&chain, 0.2, 1000).is_err());
    }

    #[test]
    fn step_sizes_stabilise_on_gaussian() {
        let target = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let mut rng = rng_from_seed(3);
        let mut steps = StepSizeState::new(3, &TuningConfig::default()).unwrap();
        let mut x = vec![0.0; 3];
        let mut log_s = vec![];
        for _ in 0..200 {
            let chain = continue_tuning(&target, &x, 200, &mut steps, &mut rng).unwrap();
            x = chain.last().unwrap().to_vec();
            log_s.push(steps.s[0].ln());
        }
        let tail = &log_s[log_s.len() * 4 / 5..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let sd = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
        assert!(sd < 0.5, "sd of ln s {sd}");
    }

    proptest! {
        #[test]
        fn accept_reject_commute(s in 1e-3f64..1e3, alpha in 0.05f64..0.95, b in 0.01f64..1.0) {
            let a = (1.0 - alpha) / alpha * b;
            let up_down = tune_step(tune_step(s, true, a, b), false, a, b);
            let down_up = tune_step(tune_step(s, false, a, b), true, a, b);
            prop_assert!((up_down - down_up).abs() < 1e-12 * up_down);
            prop_assert!((up_down / s / (a - b).exp() - 1.0).abs() < 1e-12);
        }
    }
}
