//! Parameter posteriors as sampler targets, and the two-phase sampling pipeline.

use crate::error::Result;
use crate::model::{InitialScale, ModelKind, Prior, PriorSpec};
use crate::precision::{log_posterior, LogPosteriorValue};
use crate::recursive::recursive_log_likelihood;
use crate::rng::SimRng;
use crate::sampler::{da_mh, fit_surrogate, self_tuning_rwm, Chain, LogDensity, StepSizeState, SurrogatePosterior, TuningConfig};
use crate::series::ObservationSeries;

/// How the likelihood is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodPath {
    /// Forecast recursions.
    #[default]
    Recursive,
    /// Band Cholesky of the joint precision.
    Batch,
}

/// `log p(theta | y)` over sampler coordinates.
#[derive(Debug, Clone)]
pub struct ModelPosterior {
    pub kind: ModelKind,
    pub y: ObservationSeries,
    pub priors: PriorSpec,
    pub init: InitialScale,
    pub path: LikelihoodPath,
}

impl ModelPosterior {
    pub fn new(kind: ModelKind, y: ObservationSeries, priors: PriorSpec, init: InitialScale) -> Self {
        Self { kind, y, priors, init, path: LikelihoodPath::Recursive }
    }

    pub fn with_path(mut self, path: LikelihoodPath) -> Self {
        self.path = path;
        self
    }

    pub fn evaluate(&self, coords: &[f64]) -> Result<LogPosteriorValue> {
        let th = self.kind.theta_from_coords(coords)?;
        match self.path {
            LikelihoodPath::Recursive => recursive_log_likelihood(&th, &self.y, &self.priors, &self.init),
            LikelihoodPath::Batch => log_posterior(&th, &self.y, &self.priors, &self.init),
        }
    }
}

impl LogDensity for ModelPosterior {
    /// Numerical failures count as zero density so the sampler rejects the move.
    fn log_density(&self, x: &[f64]) -> f64 {
        match self.evaluate(x) {
            Ok(v) if !v.value.is_nan() => v.value,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Settings of the learning and estimation phases.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseConfig {
    pub phase1_iters: usize,
    pub phase2_iters: usize,
    pub tuning: TuningConfig,
    /// Global scale of the correlated phase-two proposal.
    pub eps: f64,
    pub burn_frac: f64,
    pub thin_to: usize,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        Self { phase1_iters: 5000, phase2_iters: 10_000, tuning: TuningConfig::default(), eps: 2.0, burn_frac: 0.2, thin_to: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct TwoPhaseRun {
    pub phase1: Chain,
    pub steps: StepSizeState,
    pub surrogate: SurrogatePosterior,
    pub phase2: Chain,
}

/// Phase one learns step sizes and a surrogate; phase two runs delayed acceptance from where phase one stopped.
pub fn run_two_phase<T: LogDensity + ?Sized>(
    target: &T,
    theta0: &[f64],
    cfg: &TwoPhaseConfig,
    rng: &mut SimRng,
) -> Result<TwoPhaseRun> {
    let (phase1, steps, surrogate) = learn(target, theta0, cfg, rng)?;
    let start = phase1.last().unwrap_or(theta0).to_vec();
    let phase2 = da_mh(target, &surrogate, &start, cfg.phase2_iters, cfg.eps, rng)?;
    Ok(TwoPhaseRun { phase1, steps, surrogate, phase2 })
}

/// Phase one alone: the tuned chain, its step sizes and the fitted surrogate.
pub fn learn<T: LogDensity + ?Sized>(
    target: &T,
    theta0: &[f64],
    cfg: &TwoPhaseConfig,
    rng: &mut SimRng,
) -> Result<(Chain, StepSizeState, SurrogatePosterior)> {
    let (chain, steps) = self_tuning_rwm(target, theta0, cfg.phase1_iters, &cfg.tuning, rng)?;
    let surrogate = fit_surrogate(&chain, cfg.burn_frac, cfg.thin_to)?;
    Ok((chain, steps, surrogate))
}

/// Posterior means on the original parameter scale.
pub fn posterior_mean_values(kind: ModelKind, chain: &Chain) -> Vec<f64> {
    let n = chain.len().max(1) as f64;
    let mut out = vec![0.0; chain.dim()];
    for r in chain.rows() {
        for (i, (o, v)) in out.iter_mut().zip(r).enumerate() {
            *o += if kind.is_log_coord(i) { v.exp() } else { *v };
        }
    }
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Starting coordinates: prior modes where they exist, else the centre of the support in sampler coordinates.
pub fn default_start(priors: &PriorSpec) -> Vec<f64> {
    priors
        .priors()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let log = priors.kind().is_log_coord(i);
            match (*p, p.mode()) {
                (_, Some(m)) if log => m.ln(),
                (_, Some(m)) => m,
                (Prior::Uniform { lo, hi }, None) => 0.5 * (lo + hi),
                (Prior::LogFlat { lo, hi }, None) if log => 0.5 * (lo.ln() + hi.ln()),
                _ => 0.0,
            }
        })
        .collect()
}

/// `n` rows spread evenly over the chain, always including the last.
pub fn subsample(chain: &Chain, n: usize) -> Vec<Vec<f64>> {
    let len = chain.len();
    if len == 0 || n == 0 {
        return Vec::new();
    }
    let n = n.min(len);
    (0..n).map(|k| chain.sample(len - 1 - k * len / n).to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, LagSampler};
    use crate::rng::rng_from_seed;

    #[test]
    fn paths_agree_up_to_constant() {
        let th = ModelKind::Ou1d.theta_from_values(&[0.5, 0.1, 1.0]).unwrap();
        let sim = simulate(&th, 60, &LagSampler::InverseGamma { alpha: 2.0, beta: 0.1 }, &InitialScale::default(), 1, 2).unwrap();
        let rec = ModelPosterior::new(ModelKind::Ou1d, sim.series, PriorSpec::default_for(ModelKind::Ou1d), InitialScale::default());
        let bat = rec.clone().with_path(LikelihoodPath::Batch);
        let a = th.coords();
        let b = vec![0.1, -1.0, 0.2];
        let da = rec.log_density(&a) - bat.log_density(&a);
        let db = rec.log_density(&b) - bat.log_density(&b);
        assert!((da - db).abs() < 1e-8);
        assert_eq!(rec.log_density(&[f64::NAN, 0.0, 0.0]), f64::NEG_INFINITY);
        assert_eq!(rec.log_density(&[0.0, 0.0, 50.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn start_points_from_priors() {
        assert_eq!(default_start(&PriorSpec::default_for(ModelKind::Linear)), vec![0.0, 0.0, 0.0]);
        let s = default_start(&PriorSpec::default_for(ModelKind::Ou2d));
        assert!((s[0] - (0.5f64 / 11.0).ln()).abs() < 1e-12);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn subsample_is_even_and_ends_at_last() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let c = Chain::from_rows(1, &rows);
        let s = subsample(&c, 5);
        assert_eq!(s, vec![vec![9.0], vec![7.0], vec![5.0], vec![3.0], vec![1.0]]);
        assert_eq!(subsample(&c, 50).len(), 10);
    }

    #[test]
    fn two_phase_on_gaussian() {
        let target = |x: &[f64]| -0.5 * ((x[0] - 1.0).powi(2) / 0.25 + (x[1] + 2.0).powi(2) / 4.0);
        let cfg = TwoPhaseConfig { phase1_iters: 4000, phase2_iters: 20_000, ..Default::default() };
        let run = run_two_phase(&target, &[0.0, 0.0], &cfg, &mut rng_from_seed(5)).unwrap();
        let m = run.phase2.mean();
        assert!((m[0] - 1.0).abs() < 0.05 && (m[1] + 2.0).abs() < 0.2, "{m:?}");
        assert_eq!(run.phase2.expensive_evals, run.phase2.stage1_accepts());
    }
}
