use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The three supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Regularly sampled AR(1) state observed with Gaussian noise.
    Linear,
    /// Irregularly sampled Ornstein-Uhlenbeck state.
    Ou1d,
    /// Position-velocity pair driven by an Ornstein-Uhlenbeck velocity.
    Ou2d,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::Ou1d, ModelKind::Ou2d];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Ou1d => "ou1d",
            ModelKind::Ou2d => "ou2d",
        }
    }

    /// Number of free parameters.
    pub fn param_dim(self) -> usize {
        self.param_names().len()
    }

    /// Length of the hidden state (and of each observation) per time point.
    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::Ou2d => 2,
            _ => 1,
        }
    }

    /// Parameter names on the original scale, in coordinate order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Linear => &["phi", "tau2", "sigma2"],
            ModelKind::Ou1d => &["gamma", "lambda2", "sigma2"],
            ModelKind::Ou2d => &["gamma", "xi2", "lambda2", "sigma2", "tau2"],
        }
    }

    /// Whether coordinate `i` is stored as a logarithm.
    pub fn is_log_coord(self, i: usize) -> bool {
        !(self == ModelKind::Linear && i == 0)
    }

    /// Builds a parameter set from sampler coordinates (log scale for positive components).
    pub fn theta_from_coords(self, coords: &[f64]) -> Result<Theta> {
        if coords.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), got: coords.len() });
        }
        if coords.iter().any(|c| c.is_nan()) {
            return Err(Error::InvalidParameter("NaN coordinate".into()));
        }
        Ok(match self {
            ModelKind::Linear => Theta::Linear(LinearTheta { phi: coords[0], log_tau2: coords[1], log_sigma2: coords[2] }),
            ModelKind::Ou1d => Theta::Ou1d(Ou1dTheta { log_gamma: coords[0], log_lambda2: coords[1], log_sigma2: coords[2] }),
            ModelKind::Ou2d => Theta::Ou2d(Ou2dTheta {
                log_gamma: coords[0],
                log_xi2: coords[1],
                log_lambda2: coords[2],
                log_sigma2: coords[3],
                log_tau2: coords[4],
            }),
        })
    }

    /// Builds a parameter set from original-scale values.
    pub fn theta_from_values(self, values: &[f64]) -> Result<Theta> {
        if values.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), got: values.len() });
        }
        let mut coords = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            if self.is_log_coord(i) {
                coords.push(positive_log(self.param_names()[i], v)?);
            } else {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("{} must be finite", self.param_names()[i])));
                }
                coords.push(v);
            }
        }
        self.theta_from_coords(&coords)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "ar1" => Ok(ModelKind::Linear),
            "ou1d" | "ou" => Ok(ModelKind::Ou1d),
            "ou2d" => Ok(ModelKind::Ou2d),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

fn positive_log(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// AR(1) parameters `(phi, tau2, sigma2)`; variances stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTheta {
    pub phi: f64,
    pub log_tau2: f64,
    pub log_sigma2: f64,
}

impl LinearTheta {
    pub fn new(phi: f64, tau2: f64, sigma2: f64) -> Result<Self> {
        Ok(Self { phi, log_tau2: positive_log("tau2", tau2)?, log_sigma2: positive_log("sigma2", sigma2)? })
    }

    pub fn tau2(&self) -> f64 {
        self.log_tau2.exp()
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }
}

/// One-dimensional OU parameters `(gamma, lambda2, sigma2)`, all log-stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ou1dTheta {
    pub log_gamma: f64,
    pub log_lambda2: f64,
    pub log_sigma2: f64,
}

impl Ou1dTheta {
    pub fn new(gamma: f64, lambda2: f64, sigma2: f64) -> Result<Self> {
        Ok(Self {
            log_gamma: positive_log("gamma", gamma)?,
            log_lambda2: positive_log("lambda2", lambda2)?,
            log_sigma2: positive_log("sigma2", sigma2)?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }

    pub fn lambda2(&self) -> f64 {
        self.log_lambda2.exp()
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    /// Stationary variance `lambda2 / (2 gamma)`.
    pub fn stationary_variance(&self) -> f64 {
        self.lambda2() / (2.0 * self.gamma())
    }
}

/// Position-velocity OU parameters `(gamma, xi2, lambda2, sigma2, tau2)`, all log-stored.
///
/// `xi2` is the position diffusion rate, `lambda2` the velocity diffusion
/// rate, `sigma2`/`tau2` the position/velocity observation variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ou2dTheta {
    pub log_gamma: f64,
    pub log_xi2: f64,
    pub log_lambda2: f64,
    pub log_sigma2: f64,
    pub log_tau2: f64,
}

impl Ou2dTheta {
    pub fn new(gamma: f64, xi2: f64, lambda2: f64, sigma2: f64, tau2: f64) -> Result<Self> {
        Ok(Self {
            log_gamma: positive_log("gamma", gamma)?,
            log_xi2: positive_log("xi2", xi2)?,
            log_lambda2: positive_log("lambda2", lambda2)?,
            log_sigma2: positive_log("sigma2", sigma2)?,
            log_tau2: positive_log("tau2", tau2)?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }

    pub fn xi2(&self) -> f64 {
        self.log_xi2.exp()
    }

    pub fn lambda2(&self) -> f64 {
        self.log_lambda2.exp()
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    pub fn tau2(&self) -> f64 {
        self.log_tau2.exp()
    }

    /// Stationary velocity variance `lambda2 / (2 gamma)`.
    pub fn stationary_velocity_variance(&self) -> f64 {
        self.lambda2() / (2.0 * self.gamma())
    }
}

/// A parameter point for any of the model families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Linear(LinearTheta),
    Ou1d(Ou1dTheta),
    Ou2d(Ou2dTheta),
}

impl Theta {
    pub fn kind(&self) -> ModelKind {
        match self {
            Theta::Linear(_) => ModelKind::Linear,
            Theta::Ou1d(_) => ModelKind::Ou1d,
            Theta::Ou2d(_) => ModelKind::Ou2d,
        }
    }

    /// Sampler coordinates (log scale for positive components).
    pub fn coords(&self) -> Vec<f64> {
        match *self {
            Theta::Linear(t) => vec![t.phi, t.log_tau2, t.log_sigma2],
            Theta::Ou1d(t) => vec![t.log_gamma, t.log_lambda2, t.log_sigma2],
            Theta::Ou2d(t) => vec![t.log_gamma, t.log_xi2, t.log_lambda2, t.log_sigma2, t.log_tau2],
        }
    }

    /// Original-scale values in `param_names` order.
    pub fn values(&self) -> Vec<f64> {
        let kind = self.kind();
        self.coords()
            .into_iter()
            .enumerate()
            .map(|(i, c)| if kind.is_log_coord(i) { c.exp() } else { c })
            .collect()
    }

    /// Observation noise variance for each state component.
    pub fn observation_variances(&self) -> [f64; 2] {
        match self {
            Theta::Linear(t) => [t.sigma2(), f64::NAN],
            Theta::Ou1d(t) => [t.sigma2(), f64::NAN],
            Theta::Ou2d(t) => [t.sigma2(), t.tau2()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_match_dimensions() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.param_names().len(), kind.param_dim());
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
    }

    #[test]
    fn rejects_non_positive_variances() {
        assert!(LinearTheta::new(0.9, 0.0, 1.0).is_err());
        assert!(Ou2dTheta::new(0.1, -1.0, 1.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn log_storage_round_trips(vals in proptest::collection::vec(1e-6f64..1e6, 5)) {
            for kind in ModelKind::ALL {
                let v = &vals[..kind.param_dim()];
                let theta = kind.theta_from_values(v).unwrap();
                for (a, b) in theta.values().iter().zip(v) {
                    prop_assert!(((a - b) / b).abs() < 1e-14);
                }
                let again = kind.theta_from_coords(&theta.coords()).unwrap();
                prop_assert_eq!(again, theta);
            }
        }
    }
}
