//! Constant-cost-per-step forecast and filtering recursions.
//!
//! Scalar models carry the gain `K_t`, for which the forecast variance is
//! `sigma^4 / K_t` and the filtered variance `sigma^2 - K_t`. The planar
//! model carries a 2x2 gain with `K_t^-1 = B1 SigmaBar_t B1`, where `B1` is
//! the per-point observation precision; the filtered covariance is
//! `B1^-1 - K_t`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{log_prior, InitialCov, InitialScale, PriorSpec, Theta, Transition};
use crate::precision::LogPosteriorValue;
use crate::series::ObservationSeries;

const BAND_TOL: f64 = 1e-9;

/// Recursion state at step `t` (0-based): the forecast of observation `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForecastState {
    Scalar { k: f64, mu_bar: f64, sig_bar: f64, t: usize },
    Planar { k: Matrix2<f64>, mu_bar: Vector2<f64>, sig_bar: Matrix2<f64>, t: usize },
}

/// Filtered state mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl StateMoments {
    pub fn scalar(mean: f64, var: f64) -> Self {
        Self { mean: DVector::from_element(1, mean), cov: DMatrix::from_element(1, 1, var) }
    }

    pub fn planar(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        Self {
            mean: DVector::from_column_slice(mean.as_slice()),
            cov: DMatrix::from_column_slice(2, 2, cov.as_slice()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Block-diagonal stack of independent parts.
    pub fn concat(parts: &[StateMoments]) -> Self {
        let d: usize = parts.iter().map(|p| p.dim()).sum();
        let mut mean = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        let mut o = 0;
        for p in parts {
            let k = p.dim();
            mean.rows_mut(o, k).copy_from(&p.mean);
            cov.view_mut((o, o), (k, k)).copy_from(&p.cov);
            o += k;
        }
        Self { mean, cov }
    }
}

fn obs_precision(theta: &Theta) -> Matrix2<f64> {
    let [s2, t2] = theta.observation_variances();
    Matrix2::new(1.0 / s2, 0.0, 0.0, 1.0 / t2)
}

/// Forecast of the first observation from the state prior.
pub fn init_forecast(theta: &Theta, init: &InitialScale) -> ForecastState {
    let [s2, t2] = theta.observation_variances();
    match theta.initial_cov(init) {
        InitialCov::Scalar(v0) => {
            let k = s2 * s2 / (s2 + v0);
            ForecastState::Scalar { k, mu_bar: 0.0, sig_bar: s2 + v0, t: 0 }
        }
        InitialCov::Planar(v0) => {
            let k = Matrix2::new(s2 * s2 / (s2 + v0[0]), 0.0, 0.0, t2 * t2 / (t2 + v0[1]));
            let sig_bar = Matrix2::new(s2 + v0[0], 0.0, 0.0, t2 + v0[1]);
            ForecastState::Planar { k, mu_bar: Vector2::zeros(), sig_bar, t: 0 }
        }
    }
}

impl ForecastState {
    pub fn step(&self) -> usize {
        match *self {
            ForecastState::Scalar { t, .. } | ForecastState::Planar { t, .. } => t,
        }
    }

    /// Log density of observation `y` under this forecast.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        match *self {
            ForecastState::Scalar { mu_bar, sig_bar, .. } => {
                let r = y[0] - mu_bar;
                -0.5 * ((2.0 * PI * sig_bar).ln() + r * r / sig_bar)
            }
            ForecastState::Planar { mu_bar, sig_bar, .. } => {
                let r = Vector2::new(y[0], y[1]) - mu_bar;
                let det = sig_bar[(0, 0)] * sig_bar[(1, 1)] - sig_bar[(0, 1)] * sig_bar[(1, 0)];
                let quad = (sig_bar[(1, 1)] * r[0] * r[0] - 2.0 * sig_bar[(0, 1)] * r[0] * r[1]
                    + sig_bar[(0, 0)] * r[1] * r[1])
                    / det;
                -0.5 * (2.0 * (2.0 * PI).ln() + det.ln() + quad)
            }
        }
    }

    /// Forecast mean and covariance as dense values.
    pub fn forecast_moments(&self) -> StateMoments {
        match *self {
            ForecastState::Scalar { mu_bar, sig_bar, .. } => StateMoments::scalar(mu_bar, sig_bar),
            ForecastState::Planar { mu_bar, sig_bar, .. } => StateMoments::planar(mu_bar, sig_bar),
        }
    }
}

/// Advances the forecast by one observation.
///
/// `y_prev` is the observation the current state forecasts; `transition`
/// carries the state to the next observation time.
pub fn forecast_step(state: &ForecastState, theta: &Theta, transition: &Transition, y_prev: &[f64]) -> Result<ForecastState> {
    let t = state.step() + 1;
    match (*state, transition) {
        (ForecastState::Scalar { k, mu_bar, .. }, Transition::Scalar(c)) => {
            let s2 = theta.observation_variances()[0];
            let k_new = s2 * s2 / (c.tau2 + s2 + c.phi * c.phi * (s2 - k));
            if !(k_new > 0.0 && k_new <= s2 * (1.0 + BAND_TOL)) {
                return Err(Error::NumericalBreakdown { step: t, reason: format!("gain {k_new} outside (0, {s2}]") });
            }
            let mu_new = c.phi / s2 * k * mu_bar + c.phi * (1.0 - k / s2) * y_prev[0];
            Ok(ForecastState::Scalar { k: k_new, mu_bar: mu_new, sig_bar: s2 * s2 / k_new, t })
        }
        (ForecastState::Planar { k, mu_bar, .. }, Transition::Planar(c)) => {
            let b1 = obs_precision(theta);
            let b1_inv = Matrix2::new(1.0 / b1[(0, 0)], 0.0, 0.0, 1.0 / b1[(1, 1)]);
            let y = Vector2::new(y_prev[0], y_prev[1]);
            let sig_bar = c.noise_cov_from_factor() + c.phi * (b1_inv - k) * c.phi.transpose() + b1_inv;
            let sig_bar = 0.5 * (sig_bar + sig_bar.transpose());
            let k_inv = b1 * sig_bar * b1;
            let k_new = k_inv
                .try_inverse()
                .ok_or_else(|| Error::NumericalBreakdown { step: t, reason: "singular gain".into() })?;
            let k_new = 0.5 * (k_new + k_new.transpose());
            check_planar_band(&k_new, &b1_inv, t)?;
            let mu_new = c.phi * (k * b1 * mu_bar + (Matrix2::identity() - k * b1) * y);
            Ok(ForecastState::Planar { k: k_new, mu_bar: mu_new, sig_bar, t })
        }
        _ => Err(Error::InvalidParameter("transition does not match forecast state".into())),
    }
}

fn check_planar_band(k: &Matrix2<f64>, b1_inv: &Matrix2<f64>, step: usize) -> Result<()> {
    let psd = |m: &Matrix2<f64>, scale: f64| {
        let tol = BAND_TOL * scale;
        m[(0, 0)] >= -tol && m[(1, 1)] >= -tol && m.determinant() >= -tol * scale
    };
    let scale = b1_inv[(0, 0)].max(b1_inv[(1, 1)]);
    if psd(k, scale) && psd(&(b1_inv - k), scale) && k.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBreakdown { step, reason: "gain left its positive semidefinite band".into() })
    }
}

/// Filtered moments of the state at the forecast's step, given its observation.
pub fn state_moments(state: &ForecastState, theta: &Theta, y: &[f64]) -> StateMoments {
    match *state {
        ForecastState::Scalar { k, mu_bar, .. } => {
            let s2 = theta.observation_variances()[0];
            StateMoments::scalar(k * mu_bar / s2 + (1.0 - k / s2) * y[0], s2 - k)
        }
        ForecastState::Planar { k, mu_bar, .. } => {
            let b1 = obs_precision(theta);
            let b1_inv = Matrix2::new(1.0 / b1[(0, 0)], 0.0, 0.0, 1.0 / b1[(1, 1)]);
            let y = Vector2::new(y[0], y[1]);
            let kb = k * b1;
            StateMoments::planar(kb * mu_bar + (Matrix2::identity() - kb) * y, b1_inv - k)
        }
    }
}

/// Moments of the state `horizon` ahead of filtered moments `m`.
///
/// The linear model counts the horizon in steps (rounded); the OU models in seconds.
pub fn predict_state(theta: &Theta, m: &StateMoments, horizon: f64) -> Result<StateMoments> {
    if horizon <= 0.0 {
        return Ok(m.clone());
    }
    let steps = match theta {
        Theta::Linear(_) => horizon.round() as usize,
        _ => 1,
    };
    let mut out = m.clone();
    for _ in 0..steps {
        match theta.transition(horizon)? {
            Transition::Scalar(c) => {
                out = StateMoments::scalar(c.phi * out.mean[0], c.phi * c.phi * out.cov[(0, 0)] + c.tau2);
            }
            Transition::Planar(c) => {
                let mean = c.phi * Vector2::new(out.mean[0], out.mean[1]);
                let cov = Matrix2::from_column_slice(out.cov.as_slice());
                out = StateMoments::planar(mean, c.phi * cov * c.phi.transpose() + c.noise_cov());
            }
        }
    }
    Ok(out)
}

/// One step of a filtering pass on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub forecast: StateMoments,
    pub filtered: StateMoments,
    pub log_density: f64,
}

/// Runs the recursions over every axis, recording forecasts and filtered moments.
///
/// Result is indexed `[axis][t]`.
pub fn filter_series(theta: &Theta, y: &ObservationSeries, init: &InitialScale) -> Result<Vec<Vec<FilterStep>>> {
    let mut out: Vec<Vec<FilterStep>> = vec![Vec::with_capacity(y.len()); y.n_axes()];
    walk(theta, y, init, |a, t, state| {
        let obs = y.obs(a, t);
        out[a].push(FilterStep {
            forecast: state.forecast_moments(),
            filtered: state_moments(state, theta, obs),
            log_density: state.log_density(obs),
        });
    })?;
    Ok(out)
}

/// Filtered moments at the last point, all axes stacked.
pub fn final_state_moments(theta: &Theta, y: &ObservationSeries, init: &InitialScale) -> Result<StateMoments> {
    let last = y.len().checked_sub(1).ok_or_else(|| Error::InvalidParameter("empty series".into()))?;
    let mut parts = Vec::with_capacity(y.n_axes());
    walk(theta, y, init, |a, t, state| {
        if t == last {
            parts.push(state_moments(state, theta, y.obs(a, t)));
        }
    })?;
    Ok(StateMoments::concat(&parts))
}

/// Drives the recursions, calling `visit(axis, t, forecast_state)` at every point.
fn walk(
    theta: &Theta,
    y: &ObservationSeries,
    init: &InitialScale,
    mut visit: impl FnMut(usize, usize, &ForecastState),
) -> Result<()> {
    if y.state_dim() != theta.kind().state_dim() {
        return Err(Error::DimensionMismatch { expected: theta.kind().state_dim(), got: y.state_dim() });
    }
    let mut states = vec![init_forecast(theta, init); y.n_axes()];
    for t in 0..y.len() {
        if t > 0 {
            let tr = theta.transition(y.grid().gap(t))?;
            for (a, s) in states.iter_mut().enumerate() {
                *s = forecast_step(s, theta, &tr, y.obs(a, t - 1))?;
            }
        }
        for (a, s) in states.iter().enumerate() {
            visit(a, t, s);
        }
    }
    Ok(())
}

/// Log-posterior as a product of one-step forecast densities.
///
/// The breakdown reports `-1/2 sum r^2/SigmaBar` as `quadratic`,
/// `-1/2 sum ln det SigmaBar` as `log_det_l` and the `2 pi` terms as `constant`.
pub fn recursive_log_likelihood(
    theta: &Theta,
    y: &ObservationSeries,
    priors: &PriorSpec,
    init: &InitialScale,
) -> Result<LogPosteriorValue> {
    let lp = log_prior(theta, priors)?;
    if lp == f64::NEG_INFINITY {
        return Ok(LogPosteriorValue::outside_support());
    }
    let mut quadratic = 0.0;
    let mut log_det = 0.0;
    walk(theta, y, init, |a, t, s| {
        let obs = y.obs(a, t);
        match *s {
            ForecastState::Scalar { mu_bar, sig_bar, .. } => {
                let r = obs[0] - mu_bar;
                quadratic -= 0.5 * r * r / sig_bar;
                log_det -= 0.5 * sig_bar.ln();
            }
            ForecastState::Planar { mu_bar, sig_bar, .. } => {
                let r = Vector2::new(obs[0], obs[1]) - mu_bar;
                let det = sig_bar.determinant();
                let quad = (sig_bar[(1, 1)] * r[0] * r[0] - 2.0 * sig_bar[(0, 1)] * r[0] * r[1]
                    + sig_bar[(0, 0)] * r[1] * r[1])
                    / det;
                quadratic -= 0.5 * quad;
                log_det -= 0.5 * det.ln();
            }
        }
    })?;
    let m = (y.len() * y.state_dim() * y.n_axes()) as f64;
    let mut out = LogPosteriorValue {
        value: 0.0,
        quadratic,
        log_det_b: 0.0,
        log_det_l: log_det,
        log_det_r: 0.0,
        constant: -0.5 * m * (2.0 * PI).ln(),
        log_prior: lp,
    };
    out.value = out.breakdown_sum();
    if !out.value.is_finite() {
        return Err(Error::NumericalBreakdown { step: y.len(), reason: "non-finite log-likelihood".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, TimeGrid};
    use approx::assert_relative_eq;

    fn linear() -> Theta {
        ModelKind::Linear.theta_from_values(&[0.9, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn linear_initial_gain() {
        let s = init_forecast(&linear(), &InitialScale::fixed(0.0));
        let ForecastState::Scalar { k, sig_bar, mu_bar, .. } = s else { panic!() };
        assert_relative_eq!(k, 1.0 / 1.5, epsilon = 1e-15);
        assert_relative_eq!(sig_bar, 1.5, epsilon = 1e-15);
        assert_eq!(mu_bar, 0.0);
    }

    #[test]
    fn diffuse_initial_gain() {
        let s = init_forecast(&linear(), &InitialScale::fixed(1e8));
        let ForecastState::Scalar { k, sig_bar, .. } = s else { panic!() };
        assert!(k < 1e-15 && sig_bar > 1e15);
    }

    #[test]
    fn planar_initial_gain_with_zero_scale() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.1, 0.2, 0.3, 1.0, 1.0]).unwrap();
        let s = init_forecast(&th, &InitialScale::planar(0.0, 0.0));
        let ForecastState::Planar { k, .. } = s else { panic!() };
        assert_relative_eq!(k, Matrix2::identity(), epsilon = 1e-15);
    }

    #[test]
    fn first_state_is_conjugate_posterior() {
        let th = linear();
        let s = init_forecast(&th, &InitialScale::fixed(0.0));
        let m = state_moments(&s, &th, &[3.0]);
        // prior N(0, 0.5), noise 1: mean 3 * 0.5 / 1.5, var 0.5 / 1.5
        assert_relative_eq!(m.mean[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.cov[(0, 0)], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn gain_converges_monotonically_to_fixed_point() {
        let th = linear();
        let tr = th.transition(1.0).unwrap();
        let mut s = init_forecast(&th, &InitialScale::fixed(0.0));
        let mut ks = vec![];
        for _ in 0..60 {
            let ForecastState::Scalar { k, .. } = s else { panic!() };
            ks.push(k);
            s = forecast_step(&s, &th, &tr, &[0.0]).unwrap();
        }
        // K = 1 / (1.5 + 0.81 (1 - K))  =>  0.81 K^2 - 2.31 K + 1 = 0
        let fixed = (2.31 - (2.31f64 * 2.31 - 4.0 * 0.81).sqrt()) / (2.0 * 0.81);
        assert_relative_eq!(*ks.last().unwrap(), fixed, epsilon = 1e-12);
        let increasing = ks.windows(2).all(|w| w[1] <= w[0] + 1e-15);
        let decreasing = ks.windows(2).all(|w| w[1] >= w[0] - 1e-15);
        assert!(increasing || decreasing);
    }

    #[test]
    fn zero_coupling_forgets_history() {
        let th = ModelKind::Linear.theta_from_values(&[0.0, 0.3, 1.0]).unwrap();
        let tr = th.transition(1.0).unwrap();
        let s = init_forecast(&th, &InitialScale::default());
        let s = forecast_step(&s, &th, &tr, &[5.0]).unwrap();
        let ForecastState::Scalar { mu_bar, sig_bar, .. } = s else { panic!() };
        assert_eq!(mu_bar, 0.0);
        assert_relative_eq!(sig_bar, 1.3, epsilon = 1e-14);
    }

    #[test]
    fn single_point_likelihood() {
        let th = linear();
        let y = ObservationSeries::univariate(TimeGrid::regular(1, 1.0), vec![0.4]).unwrap();
        let flat = PriorSpec::default_for(ModelKind::Linear);
        let v = recursive_log_likelihood(&th, &y, &flat, &InitialScale::fixed(0.0)).unwrap();
        let expect = -0.5 * ((2.0 * PI * 1.5).ln() + 0.16 / 1.5);
        assert_relative_eq!(v.log_likelihood(), expect, epsilon = 1e-13);
    }

    #[test]
    fn mismatched_transition_is_rejected() {
        let th = linear();
        let planar = ModelKind::Ou2d.theta_from_values(&[0.1, 0.2, 0.3, 1.0, 1.0]).unwrap();
        let s = init_forecast(&th, &InitialScale::default());
        assert!(forecast_step(&s, &th, &planar.transition(1.0).unwrap(), &[0.0]).is_err());
    }

    #[test]
    fn prediction_composes_transitions() {
        let th = ModelKind::Ou1d.theta_from_values(&[0.5, 0.1, 1.0]).unwrap();
        let m = StateMoments::scalar(2.0, 0.3);
        let p = predict_state(&th, &m, 2.0).unwrap();
        let e = (-1.0f64).exp();
        assert_relative_eq!(p.mean[0], 2.0 * e, epsilon = 1e-14);
        assert_relative_eq!(p.cov[(0, 0)], e * e * 0.3 + 0.1 * (1.0 - e * e), epsilon = 1e-14);
        assert_eq!(predict_state(&th, &m, 0.0).unwrap(), m);
    }
}
