use nalgebra::{Matrix2, Vector2};

use super::theta::{LinearTheta, Ou1dTheta, Ou2dTheta, Theta};
use crate::error::{Error, Result};

/// One-step scalar transition `x_t = phi x_{t-1} + N(0, tau2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoeffs1D {
    pub phi: f64,
    pub tau2: f64,
}

/// One-step transition of the position-velocity state.
///
/// `X_t = Phi X_{t-1} + w`, with `w ~ N(0, Q)` where
/// `Q = [[var_x, cov_xu], [cov_xu, var_u]]`. The velocity part of the
/// position noise is perfectly correlated with the velocity noise, so
/// `1 - rho^2 = xi2 * dt / var_x` exactly; `inv_rho_comp` holds its reciprocal.
///
/// `d` factors the noise precision (`d d^T = Q^-1`) and `s = -Phi^T d`, so the
/// state precision gains `[s; d][s; d]^T` per transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoeffs2D {
    pub phi: Matrix2<f64>,
    pub var_x: f64,
    pub var_u: f64,
    pub cov_xu: f64,
    pub inv_rho_comp: f64,
    pub s: Matrix2<f64>,
    pub d: Matrix2<f64>,
}

impl TransitionCoeffs2D {
    pub fn noise_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.var_x, self.cov_xu, self.cov_xu, self.var_u)
    }

    /// `Q^-1 = d d^T`.
    pub fn noise_precision(&self) -> Matrix2<f64> {
        self.d * self.d.transpose()
    }

    /// `Q = d^-T d^-1`, evaluated from the triangular factor.
    pub fn noise_cov_from_factor(&self) -> Matrix2<f64> {
        let inv = lower_inverse(&self.d);
        inv.transpose() * inv
    }

    /// Correlation of position and velocity noise.
    pub fn rho(&self) -> f64 {
        self.cov_xu / (self.var_x.sqrt() * self.var_u.sqrt())
    }
}

/// Inverse of a lower-triangular 2x2 matrix.
fn lower_inverse(m: &Matrix2<f64>) -> Matrix2<f64> {
    let (a, c, d) = (m[(0, 0)], m[(1, 0)], m[(1, 1)]);
    Matrix2::new(1.0 / a, 0.0, -c / (a * d), 1.0 / d)
}

/// Transition for one step of any model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    Scalar(TransitionCoeffs1D),
    Planar(TransitionCoeffs2D),
}

pub fn transition_linear(theta: &LinearTheta) -> TransitionCoeffs1D {
    TransitionCoeffs1D { phi: theta.phi, tau2: theta.tau2() }
}

pub fn transition_ou1d(theta: &Ou1dTheta, dt: f64) -> Result<TransitionCoeffs1D> {
    check_gap(dt)?;
    let gamma = theta.gamma();
    Ok(TransitionCoeffs1D {
        phi: (-gamma * dt).exp(),
        tau2: theta.lambda2() / (2.0 * gamma) * -(-2.0 * gamma * dt).exp_m1(),
    })
}

pub fn transition_ou2d(theta: &Ou2dTheta, dt: f64) -> Result<TransitionCoeffs2D> {
    check_gap(dt)?;
    let gamma = theta.gamma();
    let lambda2 = theta.lambda2();
    let a = gamma * dt;
    let decay = (-a).exp();
    // 1 - e^{-a}, 1 - e^{-2a}, e^{a} - 1, e^{2a} - 1 without cancellation
    let one_m_decay = -(-a).exp_m1();
    let one_m_decay2 = -(-2.0 * a).exp_m1();
    let grow = a.exp_m1();
    let grow2 = (2.0 * a).exp_m1();

    let diffusion_x = theta.xi2() * dt;
    let var_u = lambda2 * one_m_decay2 / (2.0 * gamma);
    let var_x = lambda2 * grow2 * one_m_decay * one_m_decay / (2.0 * gamma.powi(3)) + diffusion_x;
    let cov_xu = lambda2 * grow * one_m_decay2 / (2.0 * gamma * gamma);
    if !(var_x > 0.0 && var_u > 0.0) || !var_x.is_finite() || !var_u.is_finite() {
        return Err(Error::InvalidParameter(format!("degenerate transition noise at dt={dt}")));
    }

    let inv_rho_comp = var_x / diffusion_x;
    let sx = var_x.sqrt();
    let su = var_u.sqrt();
    let rho = cov_xu / (sx * su);
    let scale = inv_rho_comp.sqrt();
    let root_comp = 1.0 / scale; // sqrt(1 - rho^2)
    let phi = Matrix2::new(1.0, one_m_decay / gamma, 0.0, decay);

    let d = scale * Matrix2::new(-1.0 / sx, 0.0, rho / su, -root_comp / su);
    let s = scale
        * Matrix2::new(
            1.0 / sx,
            0.0,
            one_m_decay / (gamma * sx) - rho * decay / su,
            root_comp * decay / su,
        );

    Ok(TransitionCoeffs2D { phi, var_x, var_u, cov_xu, inv_rho_comp, s, d })
}

fn check_gap(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveGap(dt))
    }
}

impl Theta {
    /// Transition across a gap of `dt` seconds (ignored by the linear model).
    pub fn transition(&self, dt: f64) -> Result<Transition> {
        match self {
            Theta::Linear(t) => Ok(Transition::Scalar(transition_linear(t))),
            Theta::Ou1d(t) => transition_ou1d(t, dt).map(Transition::Scalar),
            Theta::Ou2d(t) => transition_ou2d(t, dt).map(Transition::Planar),
        }
    }
}

/// Scale of the state prior at the first observation of a series or window.
///
/// `None` selects the model default: 0 for the linear model (the first
/// state is one transition away from a known origin), the stationary
/// standard deviation for OU states, and [`DEFAULT_POSITION_SCALE`] for the
/// non-stationary 2-D position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialScale {
    pub position: Option<f64>,
    pub velocity: Option<f64>,
}

/// Default prior standard deviation of the first 2-D position, in metres.
pub const DEFAULT_POSITION_SCALE: f64 = 100.0;

impl InitialScale {
    pub fn fixed(position: f64) -> Self {
        Self { position: Some(position), velocity: None }
    }

    pub fn planar(position: f64, velocity: f64) -> Self {
        Self { position: Some(position), velocity: Some(velocity) }
    }
}

/// Prior covariance of the first state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCov {
    Scalar(f64),
    Planar(Vector2<f64>),
}

impl Theta {
    /// Prior covariance of the first hidden state.
    ///
    /// Linear: `x_0 ~ N(0, L^2)` is marginalised through one transition, giving
    /// `phi^2 L^2 + tau2`. OU models place the scale directly on the first state.
    pub fn initial_cov(&self, init: &InitialScale) -> InitialCov {
        match self {
            Theta::Linear(t) => {
                let l = init.position.unwrap_or(0.0);
                InitialCov::Scalar(t.phi * t.phi * l * l + t.tau2())
            }
            Theta::Ou1d(t) => InitialCov::Scalar(match init.position {
                Some(l) => l * l,
                None => t.stationary_variance(),
            }),
            Theta::Ou2d(t) => {
                let lx = init.position.unwrap_or(DEFAULT_POSITION_SCALE);
                let lu2 = match init.velocity {
                    Some(l) => l * l,
                    None => t.stationary_velocity_variance(),
                };
                InitialCov::Planar(Vector2::new(lx * lx, lu2))
            }
        }
    }
}
