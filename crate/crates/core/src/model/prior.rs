use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use super::theta::{ModelKind, Theta};
use crate::error::{Error, Result};

/// Bounds of the default flat-in-log prior, `[e^-20, e^20]`.
pub const LOG_FLAT_BOUND: f64 = 20.0;

/// Prior on one parameter, stated on the original scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Inverse gamma with shape `alpha` and scale `beta`.
    InverseGamma { alpha: f64, beta: f64 },
    /// Density proportional to `1/v` on `[lo, hi]`.
    LogFlat { lo: f64, hi: f64 },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl Prior {
    pub fn inverse_gamma(alpha: f64, beta: f64) -> Result<Self> {
        let p = Prior::InverseGamma { alpha, beta };
        p.validate().map(|_| p)
    }

    pub fn log_flat(lo: f64, hi: f64) -> Result<Self> {
        let p = Prior::LogFlat { lo, hi };
        p.validate().map(|_| p)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let p = Prior::Uniform { lo, hi };
        p.validate().map(|_| p)
    }

    /// `LogFlat` on `[e^-20, e^20]`.
    pub fn default_log_flat() -> Self {
        Prior::LogFlat { lo: (-LOG_FLAT_BOUND).exp(), hi: LOG_FLAT_BOUND.exp() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::InverseGamma { alpha, beta } => alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite(),
            Prior::LogFlat { lo, hi } => lo > 0.0 && lo < hi && hi.is_finite(),
            Prior::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad prior {self}")))
        }
    }

    /// Log density at original-scale value `v`; `-inf` outside the support.
    pub fn ln_density(&self, v: f64) -> f64 {
        match *self {
            Prior::InverseGamma { alpha, beta } => {
                if v > 0.0 {
                    alpha * beta.ln() - ln_gamma(alpha) - (alpha + 1.0) * v.ln() - beta / v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::LogFlat { lo, hi } => {
                if v >= lo && v <= hi {
                    -v.ln() - (hi.ln() - lo.ln()).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Uniform { lo, hi } => {
                if v >= lo && v <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Log density of the log-transformed coordinate `nu = ln v`.
    pub fn ln_density_log_coord(&self, nu: f64) -> f64 {
        let v = nu.exp();
        let d = self.ln_density(v);
        if d == f64::NEG_INFINITY {
            d
        } else {
            d + nu
        }
    }

    /// Mode on the original scale, where one exists.
    pub fn mode(&self) -> Option<f64> {
        match *self {
            Prior::InverseGamma { alpha, beta } => Some(beta / (alpha + 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Prior::InverseGamma { alpha, beta } => write!(f, "ig:{alpha},{beta}"),
            Prior::LogFlat { lo, hi } => write!(f, "logflat:{lo:e},{hi:e}"),
            Prior::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
        }
    }
}

impl FromStr for Prior {
    type Err = Error;

    /// Parses `ig:a,b`, `logflat:lo,hi` or `uniform:lo,hi`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse prior {s:?}"));
        let (name, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let p = match name.trim().to_ascii_lowercase().as_str() {
            "ig" | "invgamma" => Prior::InverseGamma { alpha: a, beta: b },
            "logflat" => Prior::LogFlat { lo: a, hi: b },
            "uniform" => Prior::Uniform { lo: a, hi: b },
            _ => return Err(bad()),
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }
}

/// One prior per parameter, in the model's coordinate order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    kind: ModelKind,
    priors: Vec<Prior>,
}

impl PriorSpec {
    pub fn new(kind: ModelKind, priors: Vec<Prior>) -> Result<Self> {
        if priors.len() != kind.param_dim() {
            return Err(Error::DimensionMismatch { expected: kind.param_dim(), got: priors.len() });
        }
        for p in &priors {
            p.validate()?;
        }
        Ok(Self { kind, priors })
    }

    /// Defaults: the three inverse-gamma priors of the planar model, a flat
    /// prior in log on `[0.01, 10]` for the 1-D mean reversion, flat priors
    /// in log for everything else, and `Uniform(-1, 1)` on the AR coefficient.
    pub fn default_for(kind: ModelKind) -> Self {
        let flat = Prior::default_log_flat();
        let priors = match kind {
            ModelKind::Linear => vec![Prior::Uniform { lo: -1.0, hi: 1.0 }, flat, flat],
            // a mean-reversion time between 0.1 and 100 s keeps the posterior proper
            ModelKind::Ou1d => vec![Prior::LogFlat { lo: 0.01, hi: 10.0 }, flat, flat],
            ModelKind::Ou2d => vec![
                Prior::InverseGamma { alpha: 10.0, beta: 0.5 },
                Prior::InverseGamma { alpha: 5.0, beta: 2.5 },
                flat,
                Prior::InverseGamma { alpha: 5.0, beta: 2.5 },
                flat,
            ],
        };
        Self { kind, priors }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    /// Replaces the prior of the parameter called `name`.
    pub fn set(&mut self, name: &str, prior: Prior) -> Result<()> {
        let i = self
            .kind
            .param_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Config(format!("model {} has no parameter {name:?}", self.kind)))?;
        prior.validate()?;
        self.priors[i] = prior;
        Ok(())
    }
}

/// Log prior density of the sampler coordinates of `theta`.
///
/// Each component is evaluated on the original scale; log-stored
/// components also receive the Jacobian `ln v`. Outside the support the
/// result is `-inf`.
pub fn log_prior(theta: &Theta, priors: &PriorSpec) -> Result<f64> {
    let kind = theta.kind();
    if kind != priors.kind {
        return Err(Error::InvalidParameter(format!("prior for {} applied to {kind}", priors.kind)));
    }
    let mut total = 0.0;
    for (i, (c, p)) in theta.coords().into_iter().zip(&priors.priors).enumerate() {
        let term = if kind.is_log_coord(i) { p.ln_density_log_coord(c) } else { p.ln_density(c) };
        if term == f64::NEG_INFINITY || term.is_nan() {
            return Ok(f64::NEG_INFINITY);
        }
        total += term;
    }
    Ok(total)
}
