//! Sliding-window streaming estimation.
//!
//! The filter is a push-based state machine. The first `window` observations
//! only feed the learning phase; each later observation runs delayed
//! acceptance on the latest `window` points and emits a mixture estimate of
//! the current state.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixture::{mixture_moments, StateEstimate};
use crate::model::{InitialScale, ModelKind, PriorSpec};
use crate::posterior::{learn, subsample, ModelPosterior, TwoPhaseConfig};
use crate::precision::LogPosteriorValue;
use crate::recursive::{final_state_moments, predict_state, recursive_log_likelihood, StateMoments};
use crate::rng::substream;
use crate::sampler::{da_mh, SurrogatePosterior, TuningConfig};
use crate::series::ObservationSeries;

/// Offset separating learning streams from per-step streams.
const REFRESH_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    /// Window length in observations.
    pub window: usize,
    /// Realised second-stage acceptance below this triggers a refresh.
    pub threshold_alpha2: f64,
    /// A gap (seconds) at or above this halts the filter.
    pub cutoff_gap: f64,
    pub phase1_iters: usize,
    pub phase2_iters: usize,
    /// Parameter draws per mixture estimate.
    pub n_mixture: usize,
    pub eps: f64,
    /// Forecast horizon; zero disables forecasts.
    pub horizon: f64,
    pub burn_frac: f64,
    pub thin_to: usize,
    pub tuning: TuningConfig,
    pub seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let two = TwoPhaseConfig::default();
        Self {
            window: 100,
            threshold_alpha2: 0.7,
            cutoff_gap: 300.0,
            phase1_iters: two.phase1_iters,
            phase2_iters: two.phase2_iters,
            n_mixture: 100,
            eps: two.eps,
            horizon: 0.0,
            burn_frac: two.burn_frac,
            thin_to: two.thin_to,
            tuning: two.tuning,
            seed: 0,
        }
    }
}

impl WindowConfig {
    /// Checks ranges. A zero threshold is accepted and disables refreshes.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.window < 2 {
            return bad("window must be at least 2");
        }
        if !(0.0..1.0).contains(&self.threshold_alpha2) {
            return bad("threshold must lie in [0, 1)");
        }
        if !(self.cutoff_gap > 0.0) {
            return bad("cutoff gap must be positive");
        }
        if self.phase1_iters == 0 || self.phase2_iters == 0 || self.n_mixture == 0 {
            return bad("iteration and mixture counts must be positive");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be non-negative");
        }
        if !(0.0..1.0).contains(&self.burn_frac) {
            return bad("burn fraction must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn two_phase(&self) -> TwoPhaseConfig {
        TwoPhaseConfig {
            phase1_iters: self.phase1_iters,
            phase2_iters: self.phase2_iters,
            tuning: self.tuning.clone(),
            eps: self.eps,
            burn_frac: self.burn_frac,
            thin_to: self.thin_to,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterEvent {
    /// The learning phase finished at observation `step`.
    PhaseOneComplete { step: usize, surrogate: SurrogatePosterior, acceptance: Vec<f64> },
    Estimate { step: usize, estimate: StateEstimate, forecast: Option<StateEstimate>, alpha1: f64, alpha2: f64 },
    SurrogateRefreshed { step: usize },
    /// Observation `step` arrived `gap` seconds after its predecessor and was not consumed.
    Halted { step: usize, gap: f64 },
}

impl FilterEvent {
    pub fn step(&self) -> usize {
        match *self {
            FilterEvent::PhaseOneComplete { step, .. }
            | FilterEvent::Estimate { step, .. }
            | FilterEvent::SurrogateRefreshed { step }
            | FilterEvent::Halted { step, .. } => step,
        }
    }
}

/// Refresh decision: strictly below the threshold.
///
/// An undefined rate (no first-stage acceptances) refreshes unless refreshes are disabled.
pub fn check_threshold(alpha2: f64, threshold: f64) -> bool {
    alpha2 < threshold || (alpha2.is_nan() && threshold > 0.0)
}

/// Index range of the window ending at 0-based observation `t`.
pub fn window_range(t: usize, len: usize) -> Range<usize> {
    (t + 1).saturating_sub(len)..t + 1
}

/// Log-posterior on a window, restarted from the default initial scale at its first point.
pub fn window_log_posterior(
    kind: ModelKind,
    coords: &[f64],
    window: &ObservationSeries,
    priors: &PriorSpec,
    init: &InitialScale,
) -> Result<LogPosteriorValue> {
    if window.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: window.len() });
    }
    recursive_log_likelihood(&kind.theta_from_coords(coords)?, window, priors, init)
}

#[derive(Debug, Clone)]
pub struct SlidingWindowFilter {
    kind: ModelKind,
    config: WindowConfig,
    priors: PriorSpec,
    init: InitialScale,
    window: ObservationSeries,
    theta: Vec<f64>,
    surrogate: Option<SurrogatePosterior>,
    seen: usize,
    last_time: Option<f64>,
    halted: bool,
    last_step_seconds: f64,
}

impl SlidingWindowFilter {
    pub fn new(
        kind: ModelKind,
        config: WindowConfig,
        priors: PriorSpec,
        init: InitialScale,
        theta0: Vec<f64>,
        n_axes: usize,
    ) -> Result<Self> {
        config.validate()?;
        if priors.kind() != kind {
            return Err(Error::InvalidParameter(format!("priors are for {}, model is {kind}", priors.kind())));
        }
        if theta0.len() != kind.param_dim() {
            return Err(Error::DimensionMismatch { expected: kind.param_dim(), got: theta0.len() });
        }
        if n_axes == 0 {
            return Err(Error::InvalidParameter("at least one axis required".into()));
        }
        Ok(Self {
            kind,
            window: ObservationSeries::empty(kind.state_dim(), n_axes),
            config,
            priors,
            init,
            theta: theta0,
            surrogate: None,
            seen: 0,
            last_time: None,
            halted: false,
            last_step_seconds: 0.0,
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn surrogate(&self) -> Option<&SurrogatePosterior> {
        self.surrogate.as_ref()
    }

    /// Number of observations consumed so far.
    pub fn consumed(&self) -> usize {
        self.seen
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Wall time of the most recent `push`, seconds.
    pub fn last_step_seconds(&self) -> f64 {
        self.last_step_seconds
    }

    /// Installs a surrogate, skipping the learning phase.
    pub fn with_surrogate(mut self, surrogate: SurrogatePosterior) -> Result<Self> {
        if surrogate.dim() != self.kind.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.kind.param_dim(), got: surrogate.dim() });
        }
        self.theta = surrogate.mean.iter().copied().collect();
        self.surrogate = Some(surrogate);
        Ok(self)
    }

    /// Clears the halt and the window; the surrogate and the current parameters are kept.
    pub fn resume(&mut self) {
        self.halted = false;
        self.last_time = None;
        self.window = ObservationSeries::empty(self.kind.state_dim(), self.window.n_axes());
    }

    /// Feeds one observation (`values` axis-major) and returns the events it caused.
    pub fn push(&mut self, time: f64, values: &[f64]) -> Result<Vec<FilterEvent>> {
        if self.halted {
            return Err(Error::InvalidParameter("filter is halted; call resume first".into()));
        }
        let start = Instant::now();
        let step = self.seen;
        if let Some(prev) = self.last_time {
            let gap = time - prev;
            if gap >= self.config.cutoff_gap {
                self.halted = true;
                self.last_step_seconds = start.elapsed().as_secs_f64();
                return Ok(vec![FilterEvent::Halted { step, gap }]);
            }
        }
        self.window.push(time, values)?;
        if self.window.len() > self.config.window {
            self.window = self.window.window(1..self.window.len());
        }
        self.seen += 1;
        self.last_time = Some(time);

        let mut events = Vec::new();
        if self.surrogate.is_none() {
            if self.window.len() == self.config.window {
                let acceptance = self.relearn(step)?;
                let surrogate = self.surrogate.clone().expect("learned");
                events.push(FilterEvent::PhaseOneComplete { step, surrogate, acceptance });
            }
        } else if self.window.len() >= 2 {
            events.extend(self.estimate(step, time)?);
        }
        self.last_step_seconds = start.elapsed().as_secs_f64();
        Ok(events)
    }

    fn target(&self) -> ModelPosterior {
        ModelPosterior::new(self.kind, self.window.clone(), self.priors.clone(), self.init)
    }

    /// Runs the learning phase on the current window; returns per-coordinate acceptance over its second half.
    fn relearn(&mut self, step: usize) -> Result<Vec<f64>> {
        let mut rng = substream(self.config.seed, REFRESH_STREAM + step as u64);
        let (chain, _, surrogate) = learn(&self.target(), &self.theta, &self.config.two_phase(), &mut rng)?;
        if let Some(last) = chain.last() {
            self.theta = last.to_vec();
        }
        self.surrogate = Some(surrogate);
        Ok(chain.coord_acceptance(chain.len() / 2..chain.len()))
    }

    fn estimate(&mut self, step: usize, time: f64) -> Result<Vec<FilterEvent>> {
        let target = self.target();
        let surrogate = self.surrogate.as_ref().expect("estimation needs a surrogate");
        let mut rng = substream(self.config.seed, step as u64 + 1);
        let chain = da_mh(&target, surrogate, &self.theta, self.config.phase2_iters, self.config.eps, &mut rng)?;
        if let Some(last) = chain.last() {
            self.theta = last.to_vec();
        }
        let draws = subsample(&chain, self.config.n_mixture);
        let (kind, init, window) = (self.kind, &self.init, &self.window);
        let horizon = self.config.horizon;
        let parts: Vec<(StateMoments, Option<StateMoments>)> = draws
            .par_iter()
            .map(|c| {
                let th = kind.theta_from_coords(c)?;
                let now = final_state_moments(&th, window, init)?;
                let ahead = if horizon > 0.0 { Some(predict_axes(&th, &now, horizon)?) } else { None };
                Ok((now, ahead))
            })
            .collect::<Result<_>>()?;
        let now: Vec<StateMoments> = parts.iter().map(|p| p.0.clone()).collect();
        let estimate = mixture_moments(&now)?.at(step, time);
        let forecast = if horizon > 0.0 {
            let ahead: Vec<StateMoments> = parts.into_iter().filter_map(|p| p.1).collect();
            Some(mixture_moments(&ahead)?.at(step, time + horizon))
        } else {
            None
        };
        let (alpha1, alpha2) = (chain.alpha1(), chain.alpha2());
        let mut events = vec![FilterEvent::Estimate { step, estimate, forecast, alpha1, alpha2 }];
        if check_threshold(alpha2, self.config.threshold_alpha2) {
            self.relearn(step)?;
            events.push(FilterEvent::SurrogateRefreshed { step });
        }
        Ok(events)
    }
}

/// Forecasts stacked per-axis moments block by block.
fn predict_axes(theta: &crate::model::Theta, m: &StateMoments, horizon: f64) -> Result<StateMoments> {
    let d = theta.kind().state_dim();
    let blocks = (0..m.dim() / d)
        .map(|a| {
            let r = a * d;
            let part = StateMoments {
                mean: m.mean.rows(r, d).into_owned(),
                cov: m.cov.view((r, r), (d, d)).into_owned(),
            };
            predict_state(theta, &part, horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateMoments::concat(&blocks))
}

/// How a stream run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEnd {
    Exhausted,
    /// The filter halted; `pending` is the observation that was not consumed.
    Halted { step: usize, gap: f64, pending: (f64, Vec<f64>) },
}

/// Pushes observations until the source runs dry or the filter halts, handing each event to `sink`.
///
/// After a halt, `filter.resume()` followed by another call (starting with `pending`) continues the stream.
pub fn run_stream<I>(
    filter: &mut SlidingWindowFilter,
    source: I,
    mut sink: impl FnMut(&FilterEvent) -> Result<()>,
) -> Result<StreamEnd>
where
    I: IntoIterator<Item = (f64, Vec<f64>)>,
{
    for (time, values) in source {
        for ev in filter.push(time, &values)? {
            sink(&ev)?;
            if let FilterEvent::Halted { step, gap } = ev {
                return Ok(StreamEnd::Halted { step, gap, pending: (time, values) });
            }
        }
    }
    Ok(StreamEnd::Exhausted)
}

/// Rows of a series in the form `run_stream` consumes.
pub fn series_source(y: &ObservationSeries) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
    (0..y.len()).map(move |t| (y.grid().time(t), y.row(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, InitialScale, LagSampler};

    fn small_config() -> WindowConfig {
        WindowConfig {
            window: 20,
            phase1_iters: 600,
            phase2_iters: 300,
            n_mixture: 10,
            thin_to: 200,
            seed: 9,
            ..Default::default()
        }
    }

    fn ou1d_series(n: usize) -> ObservationSeries {
        let th = ModelKind::Ou1d.theta_from_values(&[0.5, 0.1, 1.0]).unwrap();
        simulate(&th, n, &LagSampler::InverseGamma { alpha: 2.0, beta: 0.1 }, &InitialScale::default(), 1, 4)
            .unwrap()
            .series
    }

    fn filter(cfg: WindowConfig) -> SlidingWindowFilter {
        let priors = PriorSpec::default_for(ModelKind::Ou1d);
        let start = vec![(0.5f64).ln(), (0.1f64).ln(), 0.0];
        SlidingWindowFilter::new(ModelKind::Ou1d, cfg, priors, InitialScale::default(), start, 1).unwrap()
    }

    fn collect(f: &mut SlidingWindowFilter, y: &ObservationSeries) -> (Vec<FilterEvent>, StreamEnd) {
        let mut out = Vec::new();
        let end = run_stream(f, series_source(y), |e| {
            out.push(e.clone());
            Ok(())
        })
        .unwrap();
        (out, end)
    }

    #[test]
    fn threshold_examples() {
        assert!(check_threshold(0.65, 0.7));
        assert!(!check_threshold(0.7, 0.7));
        assert!(!check_threshold(0.0, 0.0));
        assert!(!check_threshold(f64::NAN, 0.0));
    }

    #[test]
    fn window_arithmetic() {
        assert_eq!(window_range(0, 100), 0..1);
        assert_eq!(window_range(99, 100), 0..100);
        assert_eq!(window_range(100, 100), 1..101);
        assert_eq!(window_range(2000, 100).len(), 100);
    }

    #[test]
    fn config_validation() {
        assert!(WindowConfig::default().validate().is_ok());
        for bad in [
            WindowConfig { window: 1, ..Default::default() },
            WindowConfig { threshold_alpha2: 1.0, ..Default::default() },
            WindowConfig { cutoff_gap: 0.0, ..Default::default() },
            WindowConfig { n_mixture: 0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn full_window_equals_series_posterior() {
        let y = ou1d_series(50);
        let priors = PriorSpec::default_for(ModelKind::Ou1d);
        let c = [0.1, -2.0, 0.0];
        let th = ModelKind::Ou1d.theta_from_coords(&c).unwrap();
        let a = window_log_posterior(ModelKind::Ou1d, &c, &y, &priors, &InitialScale::default()).unwrap();
        let b = recursive_log_likelihood(&th, &y, &priors, &InitialScale::default()).unwrap();
        assert_eq!(a, b);
        let one = y.window(0..1);
        assert!(window_log_posterior(ModelKind::Ou1d, &c, &one, &priors, &InitialScale::default()).is_err());
    }

    #[test]
    fn no_refresh_stream_shape() {
        let y = ou1d_series(35);
        let mut f = filter(WindowConfig { threshold_alpha2: 0.0, ..small_config() });
        let (ev, end) = collect(&mut f, &y);
        assert_eq!(end, StreamEnd::Exhausted);
        assert_eq!(ev.len(), 1 + 15);
        assert!(matches!(ev[0], FilterEvent::PhaseOneComplete { step: 19, .. }));
        for (k, e) in ev[1..].iter().enumerate() {
            match e {
                FilterEvent::Estimate { step, estimate, alpha1, .. } => {
                    assert_eq!(*step, 20 + k);
                    assert_eq!(estimate.timestamp, y.grid().time(*step));
                    assert_eq!(estimate.t, *step);
                    assert_eq!(estimate.n_components, 10);
                    assert!((0.0..=1.0).contains(alpha1));
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(ev.windows(2).all(|w| w[0].step() <= w[1].step()));
    }

    #[test]
    fn same_seed_same_events() {
        let y = ou1d_series(30);
        let a = collect(&mut filter(small_config()), &y).0;
        let b = collect(&mut filter(small_config()), &y).0;
        assert_eq!(a, b);
        let c = collect(&mut filter(WindowConfig { seed: 10, ..small_config() }), &y).0;
        assert_ne!(a, c);
    }

    #[test]
    fn refresh_follows_low_rate() {
        let y = ou1d_series(26);
        // a threshold this close to one refreshes at nearly every step
        let (ev, _) = collect(&mut filter(WindowConfig { threshold_alpha2: 0.999, ..small_config() }), &y);
        for w in ev.windows(2) {
            if let FilterEvent::SurrogateRefreshed { step } = w[1] {
                match w[0] {
                    FilterEvent::Estimate { step: s, alpha2, .. } => {
                        assert_eq!(s, step);
                        assert!(check_threshold(alpha2, 0.999));
                    }
                    ref other => panic!("refresh after {other:?}"),
                }
            }
        }
        assert!(ev.iter().any(|e| matches!(e, FilterEvent::SurrogateRefreshed { .. })));
    }

    #[test]
    fn halts_at_gap_and_resumes() {
        let base = ou1d_series(40);
        let mut times = base.grid().timestamps().to_vec();
        for t in times.iter_mut().skip(30) {
            *t += 400.0;
        }
        let y = ObservationSeries::univariate(crate::model::TimeGrid::new(times).unwrap(), base.axis(0).to_vec()).unwrap();
        let mut f = filter(small_config());
        let (ev, end) = collect(&mut f, &y);
        let gap = y.grid().gap(30);
        assert_eq!(ev.last(), Some(&FilterEvent::Halted { step: 30, gap }));
        assert!(gap >= 400.0);
        assert!(f.is_halted());
        assert!(f.push(1e9, &[0.0]).is_err());
        let StreamEnd::Halted { pending, .. } = end else { panic!("not halted") };
        assert_eq!(pending.0, y.grid().time(30));
        assert_eq!(f.consumed(), 30);

        f.resume();
        let rest = std::iter::once(pending).chain((31..40).map(|t| (y.grid().time(t), y.row(t))));
        let mut after = Vec::new();
        let end = run_stream(&mut f, rest, |e| {
            after.push(e.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(end, StreamEnd::Exhausted);
        // the first resumed point has no predecessor in the window
        assert!(after.iter().all(|e| !matches!(e, FilterEvent::PhaseOneComplete { .. })));
        let est: Vec<usize> = after.iter().filter(|e| matches!(e, FilterEvent::Estimate { .. })).map(|e| e.step()).collect();
        assert_eq!(est, (31..40).collect::<Vec<_>>());
    }

    #[test]
    fn forecast_widens() {
        let y = ou1d_series(24);
        let (ev, _) = collect(&mut filter(WindowConfig { horizon: 5.0, threshold_alpha2: 0.0, ..small_config() }), &y);
        for e in ev {
            if let FilterEvent::Estimate { estimate, forecast: Some(fc), .. } = e {
                assert!(fc.cov[(0, 0)] > 0.0 && fc.mean[0].is_finite());
                assert_eq!(fc.timestamp, estimate.timestamp + 5.0);
            }
        }
    }

    #[test]
    fn planar_filter_runs() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.05, 0.5, 0.01, 0.2, 0.3]).unwrap();
        let sim = simulate(&th, 30, &LagSampler::Constant(1.0), &InitialScale { position: Some(1.0), velocity: None }, 2, 3).unwrap();
        let priors = PriorSpec::default_for(ModelKind::Ou2d);
        let cfg = WindowConfig { threshold_alpha2: 0.0, horizon: 2.0, ..small_config() };
        let mut f = SlidingWindowFilter::new(ModelKind::Ou2d, cfg, priors, InitialScale::default(), th.coords(), 2).unwrap();
        let (ev, _) = collect(&mut f, &sim.series);
        let est: Vec<&StateEstimate> = ev
            .iter()
            .filter_map(|e| match e {
                FilterEvent::Estimate { estimate, .. } => Some(estimate),
                _ => None,
            })
            .collect();
        assert_eq!(est.len(), 10);
        assert_eq!(est[0].mean.len(), 4);
        // axes share parameters, so the mixture couples them only through the spread of means
        assert!((est[0].cov.clone() - est[0].cov.transpose()).amax() < 1e-12);
    }

    #[test]
    fn block_forecast_matches_single_axis() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.05, 0.5, 0.01, 0.2, 0.3]).unwrap();
        let a = StateMoments::planar(nalgebra::Vector2::new(1.0, -0.5), nalgebra::Matrix2::new(0.2, 0.01, 0.01, 0.05));
        let b = StateMoments::planar(nalgebra::Vector2::new(-2.0, 0.1), nalgebra::Matrix2::new(0.3, 0.0, 0.0, 0.02));
        let both = predict_axes(&th, &StateMoments::concat(&[a.clone(), b.clone()]), 3.0).unwrap();
        let pa = predict_state(&th, &a, 3.0).unwrap();
        let pb = predict_state(&th, &b, 3.0).unwrap();
        let expect = StateMoments::concat(&[pa, pb]);
        assert!((both.mean - expect.mean).amax() < 1e-15);
        assert!((both.cov - expect.cov).amax() < 1e-15);
    }
}
